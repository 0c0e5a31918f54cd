#include "worldsync/error.hpp"

namespace worldsync {

const char* errc_name(Errc code)
{
    switch (code) {
    case Errc::syntax_error: return "SyntaxError";
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::unknown_kind: return "UnknownKind";
    case Errc::too_long: return "TooLong";
    case Errc::truncated: return "Truncated";
    case Errc::unknown_tag: return "UnknownTag";
    case Errc::unknown_body_type: return "UnknownBodyType";
    case Errc::bad_magic: return "BadMagic";
    case Errc::bad_version: return "BadVersion";
    case Errc::mtu_too_small: return "MtuTooSmall";
    case Errc::inconsistent_fragment_set: return "InconsistentFragmentSet";
    case Errc::unknown_endpoint: return "UnknownEndpoint";
    case Errc::channel_closed: return "ChannelClosed";
    case Errc::give_up: return "GiveUp";
    case Errc::negative_rtt: return "NegativeRtt";
    case Errc::empty_sample_set: return "EmptySampleSet";
    case Errc::unknown_object: return "UnknownObject";
    case Errc::kind_mismatch: return "KindMismatch";
    case Errc::schema_version_mismatch: return "SchemaVersionMismatch";
    case Errc::missing_position: return "MissingPosition";
    case Errc::unknown_method: return "UnknownMethod";
    case Errc::duplicate_handler: return "DuplicateHandler";
    case Errc::unroutable: return "Unroutable";
    case Errc::timeout: return "Timeout";
    case Errc::not_a_stream_method: return "NotAStreamMethod";
    case Errc::stream_closed: return "StreamClosed";
    case Errc::store_unavailable: return "StoreUnavailable";
    case Errc::unknown_topic: return "UnknownTopic";
    case Errc::unknown_group: return "UnknownGroup";
    case Errc::no_backend_available: return "NoBackendAvailable";
    case Errc::empty_samples: return "EmptySamples";
    case Errc::non_positive_fps: return "NonPositiveFps";
    case Errc::non_positive_input: return "NonPositiveInput";
    case Errc::invalid_scenario: return "InvalidScenario";
    case Errc::invalid_argument: return "InvalidArgument";
    }
    return "UnknownError";
}

} // namespace worldsync

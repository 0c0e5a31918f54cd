#pragma once

#include <stdexcept>
#include <string>

namespace worldsync {

// Every failure mode the framework reports. Violations that are data
// (schema validation, equivalence divergence) are returned, not thrown.
enum class Errc {
    // schema
    syntax_error,
    duplicate_id,
    unknown_kind,
    // wire
    too_long,
    truncated,
    unknown_tag,
    unknown_body_type,
    bad_magic,
    bad_version,
    mtu_too_small,
    inconsistent_fragment_set,
    // transport
    unknown_endpoint,
    channel_closed,
    give_up,
    // clocksync
    negative_rtt,
    empty_sample_set,
    // replication
    unknown_object,
    kind_mismatch,
    schema_version_mismatch,
    missing_position,
    // rpc
    unknown_method,
    duplicate_handler,
    unroutable,
    timeout,
    not_a_stream_method,
    stream_closed,
    // statestore
    store_unavailable,
    // broker
    unknown_topic,
    unknown_group,
    // cluster
    no_backend_available,
    // harness
    empty_samples,
    non_positive_fps,
    non_positive_input,
    invalid_scenario,
    invalid_argument,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message)
        , code_(code)
    {
    }

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message)
{
    throw Error(code, message);
}

} // namespace worldsync

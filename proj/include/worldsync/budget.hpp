#pragma once

#include <string>
#include <vector>

namespace worldsync::harness {

enum class RateClass {
    BelowRealtime, // < 24 fps: no longer perceived as real time
    Realtime, // >= 24 fps
    VRComfort, // >= 90 fps: the VR industry reference rate
};

const char* rate_class_name(RateClass cls);

struct FrameBudget {
    double fps = 0.0;
    double period_ms = 0.0; // full precision, 1000 / fps
    double period_display_ms = 0.0; // rounded to 0.1 ms for reports
    RateClass classification = RateClass::BelowRealtime;
};

FrameBudget frame_deadline(double fps); // throws NonPositiveFps

enum class Verdict {
    Direct, // budget < 5 ms: direct connection, no hosted tier
    StatefulDedicated, // 5..40 ms, up to ~100 users per scene
    HybridStatelessRpc, // 5..40 ms but beyond the scene user limit
    StatelessHttp, // > 40 ms: stateless HTTP tier, scales horizontally
};

const char* verdict_name(Verdict verdict);

struct DeploymentRecommendation {
    Verdict verdict = Verdict::Direct;
    std::string rationale;
};

// Pure threshold rule. Budget boundaries at exactly 5.0 and 40.0 ms route
// to the dedicated tier; the 100-user scene limit is an order-of-magnitude
// guide, not a law, and the rationale says so.
DeploymentRecommendation recommend(double latency_budget_ms, double users_per_scene); // throws NonPositiveInput

// Nearest-rank percentile: the value at index ceil(p/100 * n) of the
// ascending sort, p in (0, 100].
double percentile(std::vector<double> samples, double p); // throws EmptySamples

} // namespace worldsync::harness

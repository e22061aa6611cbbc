#include "microhd/common.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

namespace microhd {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid-argument";
        case ErrorCode::no_quote: return "no-quote";
        case ErrorCode::undefined_imbalance: return "undefined-imbalance";
        case ErrorCode::zero_volume: return "zero-volume";
        case ErrorCode::invariant_violation: return "invariant-violation";
        case ErrorCode::rejected_event: return "rejected-event";
        case ErrorCode::parse_error: return "parse-error";
        case ErrorCode::insufficient_data: return "insufficient-data";
        case ErrorCode::estimation_failure: return "estimation-failure";
        case ErrorCode::diverged: return "diverged";
        case ErrorCode::dimension_mismatch: return "dimension-mismatch";
        case ErrorCode::untrained_model: return "untrained-model";
        case ErrorCode::io_error: return "io-error";
    }
    return "unknown";
}

double exponential(Rng& rng, double rate) {
    // 1 - u lies in (0, 1], so the log is finite.
    return -std::log(1.0 - uniform01(rng)) / rate;
}

std::string hexfloat(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::hex);
    if (ec != std::errc{}) throw Error(ErrorCode::io_error, "hexfloat: formatting failed");
    return std::string(buf, end);
}

double parse_hexfloat(std::string_view text) {
    bool negative = false;
    if (!text.empty() && text.front() == '-') {
        negative = true;
        text.remove_prefix(1);
    }
    if (text.size() >= 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) text.remove_prefix(2);
    double value = 0.0;
    if (text == "inf") {
        value = HUGE_VAL;
    } else if (text == "nan") {
        value = std::nan("");
    } else {
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, std::chars_format::hex);
        if (ec != std::errc{} || ptr != text.data() + text.size())
            throw Error(ErrorCode::parse_error, "bad hexfloat '" + std::string(text) + "'");
    }
    return negative ? -value : value;
}

}  // namespace microhd

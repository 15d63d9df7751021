#pragma once

#include <stdexcept>
#include <string>

namespace hsi {

// Error codes kept distinct so callers (and tests) can tell failure modes apart
// without parsing message strings.
enum class errc {
    bad_magic,
    truncated,
    non_finite,
    dim_overflow,
    dim_mismatch,
    bad_wavelengths,
    negative_value,
    index_out_of_range,
    io_failure,
    bad_argument,
    empty_input,
    single_class,
    zero_norm,
    k_exceeds_pixels,
    not_foreground,
    bad_label,
};

const char* errc_name(errc c);

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    errc code() const { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) {
    throw Error(code, what);
}

}  // namespace hsi

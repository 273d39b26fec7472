#pragma once

#include <stdexcept>
#include <string>

namespace hsst {

// Error taxonomy used across the library. Every failure surfaces as one of
// these; the CLI maps ConfigError/InputError to exit 2 and the rest to 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration (bad architecture, dataset too small, unknown keys).
struct ConfigError : Error {
    using Error::Error;
};

// Malformed runtime input (shape mismatch, empty prototype list, zero vector).
struct InputError : Error {
    using Error::Error;
};

// Non-finite value encountered during computation.
struct NumericError : Error {
    using Error::Error;
};

// Data fails a documented validity check (template support leak, bad coords).
struct ValidationError : Error {
    using Error::Error;
};

enum class Domain { NIR, VIS };

inline const char* to_string(Domain d) { return d == Domain::NIR ? "NIR" : "VIS"; }

inline Domain opposite(Domain d) { return d == Domain::NIR ? Domain::VIS : Domain::NIR; }

inline Domain domain_from_string(const std::string& s) {
    if (s == "NIR" || s == "nir") return Domain::NIR;
    if (s == "VIS" || s == "vis") return Domain::VIS;
    throw InputError("unknown domain: " + s);
}

}  // namespace hsst

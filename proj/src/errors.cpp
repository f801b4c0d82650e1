#include "ratio_forge/errors.hpp"

#include <string>

namespace ratio_forge {

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : InputError(source + ", line " + std::to_string(line) + ": " + what), line_(line) {}

ValidationError::ValidationError(const std::string& source, std::size_t line,
                                 const std::string& field, const std::string& what)
    : InputError((line > 0 ? source + ", line " + std::to_string(line) + ": "
                           : source.empty() ? std::string() : source + ": ") +
                 "field '" + field + "': " + what),
      field_(field),
      detail_(what),
      line_(line) {}

SaturationError::SaturationError(std::size_t position, double value, double bound)
    : NumericError("filtered log-ratio " + std::to_string(value) + " at position " +
                   std::to_string(position) + " exceeds saturation bound " +
                   std::to_string(bound)),
      position_(position) {}

DivergenceError::DivergenceError(std::size_t step, double magnitude)
    : NumericError("training diverged at step " + std::to_string(step) +
                   ": parameter magnitude " + std::to_string(magnitude)),
      step_(step) {}

}  // namespace ratio_forge

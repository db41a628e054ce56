#pragma once

// Versioned model file: 8 magic bytes "FRODAMDL", u32 format version, u64
// header length, a JSON header of that many bytes, then every matrix listed
// in the header's "matrices" array in the FRODA1 binary layout.

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "froda/model.hpp"

namespace froda {

inline constexpr std::uint32_t kModelFormatVersion = 1;

class BadModelFile : public Error {
 public:
  using Error::Error;
};

void write_model(const FactorizedModel& model, std::ostream& out);
FactorizedModel read_model(std::istream& in);

void save_model(const FactorizedModel& model, const std::filesystem::path& path);
FactorizedModel load_model(const std::filesystem::path& path);

}  // namespace froda

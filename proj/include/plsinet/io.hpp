#pragma once

#include "plsinet/errors.hpp"
#include "plsinet/model.hpp"
#include "plsinet/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace plsinet {

// Malformed or mismatched user input: bad flags, missing columns, unparsable cells.
class ArgumentError : public Error {
public:
    using Error::Error;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    /// Index of a header name; throws ArgumentError naming the file's columns.
    std::size_t column_index(const std::string& name) const;
    std::vector<double> column(const std::string& name) const;
};

/// Header-driven numeric CSV. Decimal point is always '.', independent of the
/// process locale. Ragged rows and non-numeric cells are rejected with the
/// line and column of the offending cell.
CsvTable read_csv(std::istream& in, const std::string& source = "<stream>", char delim = ',');
CsvTable read_csv(const std::filesystem::path& path, char delim = ',');

/// Shortest round-tripping decimal representation.
std::string format_double(double v);

/// A table of preformatted cells rendered both as aligned text and CSV.
struct TextTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> notes; // '#' lines after the aligned text

    std::string aligned() const;
    std::string csv() const;
};

std::string sha256_hex(const std::filesystem::path& path);
std::string sha256_hex_bytes(const std::string& bytes);

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

nlohmann::json to_json(const FitConfig& config);
FitConfig fit_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MlpSpec& spec);
MlpSpec mlp_spec_from_json(const nlohmann::json& j);

/// Fitted model plus what prediction needs to reproduce the training inputs.
struct Checkpoint {
    ModelParams params;
    Family family = Family::gaussian;
    std::vector<std::string> exposures;
    std::vector<std::string> covariates;
    bool intercept = false; // a constant column was prepended to Z
    std::vector<double> x_mean; // empty when exposures were not standardized
    std::vector<double> x_sd;
    nlohmann::json extra = nlohmann::json::object();
};

/// Binary layout, little-endian:
///   8 bytes  magic "PLSINET\0"
///   u32      format version (1)
///   u64      header length L
///   L bytes  JSON header (UTF-8) describing the payload blocks
///   f64[]    payload
/// Models occupy consecutive payload blocks [beta | gamma | theta] followed by
/// the standardization means and SDs.
inline constexpr char kCheckpointMagic[8] = {'P', 'L', 'S', 'I', 'N', 'E', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Several models sharing one spec (bootstrap replicates).
struct ModelBundle {
    std::vector<ModelParams> models;
    std::vector<std::size_t> ids;
    std::vector<bool> mirrored;
    nlohmann::json extra = nlohmann::json::object();
};

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::filesystem::path& path);

/// Raw access used by both formats and by tests.
struct RawCheckpoint {
    nlohmann::json header;
    std::vector<double> payload;
};
void write_raw_checkpoint(const std::filesystem::path& path, const RawCheckpoint& raw);
RawCheckpoint read_raw_checkpoint(const std::filesystem::path& path);

} // namespace plsinet

#include "plsinet/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

namespace plsinet {

using nlohmann::json;

// ---- CSV ------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::string_view unquote(std::string_view s) {
    s = trim(s);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t k = 0; k <= line.size(); ++k) {
        if (k == line.size() || line[k] == delim) {
            out.push_back(line.substr(start, k - start));
            start = k + 1;
        }
    }
    return out;
}

bool parse_number(std::string_view cell, double& out) {
    cell = unquote(cell);
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    if (cell.empty()) return false;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return res.ec == std::errc() && res.ptr == cell.data() + cell.size() && std::isfinite(out);
}

} // namespace

std::size_t CsvTable::column_index(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        std::string cols;
        for (const auto& h : header) cols += (cols.empty() ? "" : ", ") + h;
        throw ArgumentError("column '" + name + "' not found; available columns: " + cols);
    }
    return static_cast<std::size_t>(it - header.begin());
}

std::vector<double> CsvTable::column(const std::string& name) const {
    const std::size_t j = column_index(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[j]);
    return out;
}

CsvTable read_csv(std::istream& in, const std::string& source, char delim) {
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!trim(line).empty()) break;
    }
    if (trim(line).empty()) throw ArgumentError(source + ": file is empty (no header row)");
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    for (auto cell : split(line, delim)) {
        const auto name = unquote(cell);
        if (name.empty()) {
            throw ArgumentError(source + ":" + std::to_string(lineno) + ": empty column name in header");
        }
        t.header.emplace_back(name);
    }
    for (std::size_t a = 0; a < t.header.size(); ++a) {
        for (std::size_t b = a + 1; b < t.header.size(); ++b) {
            if (t.header[a] == t.header[b]) {
                throw ArgumentError(source + ": duplicate column name '" + t.header[a] + "'");
            }
        }
    }
    const std::size_t width = t.header.size();
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split(line, delim);
        if (cells.size() != width) {
            throw ArgumentError(source + ":" + std::to_string(lineno) + ": expected " +
                                std::to_string(width) + " fields, found " +
                                std::to_string(cells.size()));
        }
        std::vector<double> row(width);
        for (std::size_t j = 0; j < width; ++j) {
            if (!parse_number(cells[j], row[j])) {
                throw ArgumentError(source + ":" + std::to_string(lineno) + ": column " +
                                    std::to_string(j + 1) + " ('" + t.header[j] +
                                    "'): non-numeric value '" + std::string(trim(cells[j])) + "'");
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

CsvTable read_csv(const std::filesystem::path& path, char delim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open input file '" + path.string() + "'");
    return read_csv(in, path.string(), delim);
}

std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), res.ptr};
}

// ---- tables ---------------------------------------------------------------

std::string TextTable::aligned() const {
    std::vector<std::size_t> w(header.size(), 0);
    for (std::size_t j = 0; j < header.size(); ++j) w[j] = header[j].size();
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < r.size() && j < w.size(); ++j) w[j] = std::max(w[j], r[j].size());
    }
    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& cells) {
        std::string line;
        for (std::size_t j = 0; j < cells.size(); ++j) {
            const auto pad = std::string(w[j] - std::min(w[j], cells[j].size()), ' ');
            // First column left-aligned (labels), the rest right-aligned.
            line += j == 0 ? cells[j] + pad : pad + cells[j];
            if (j + 1 < cells.size()) line += "  ";
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out << line << '\n';
    };
    emit(header);
    for (const auto& r : rows) emit(r);
    for (const auto& n : notes) out << "# " << n << '\n';
    return out.str();
}

std::string TextTable::csv() const {
    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t j = 0; j < cells.size(); ++j) {
            const bool quote = cells[j].find_first_of(",\"\n") != std::string::npos;
            if (quote) {
                std::string q = "\"";
                for (char c : cells[j]) q += c == '"' ? std::string("\"\"") : std::string(1, c);
                out << q << '"';
            } else {
                out << cells[j];
            }
            out << (j + 1 < cells.size() ? "," : "");
        }
        out << '\n';
    };
    emit(header);
    for (const auto& r : rows) emit(r);
    return out.str();
}

// ---- files and digests ----------------------------------------------------

std::string sha256_hex_bytes(const std::string& bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xF];
    }
    return out;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string sha256_hex(const std::filesystem::path& path) {
    return sha256_hex_bytes(read_text(path));
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ArgumentError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw Error("write to '" + path.string() + "' failed");
}

// ---- config JSON ----------------------------------------------------------

json to_json(const MlpSpec& spec) {
    return {{"hidden", spec.hidden}, {"activation", std::string(to_string(spec.activation))}};
}

MlpSpec mlp_spec_from_json(const json& j) {
    MlpSpec s;
    s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    s.activation = parse_activation(j.at("activation").get<std::string>());
    s.validate();
    return s;
}

json to_json(const FitConfig& c) {
    return {
        {"family", std::string(to_string(c.family))},
        {"mlp", to_json(c.mlp)},
        {"epochs", c.epochs},
        {"batch_size", c.batch_size},
        {"learning_rate", c.learning_rate},
        {"adam_betas", {c.adam_betas[0], c.adam_betas[1]}},
        {"adam_eps", c.adam_eps},
        {"anchoring_weight", c.anchoring_weight},
        {"index_centering_weight", c.index_centering_weight},
        {"early_stop_patience", c.early_stop_patience},
        {"validation_fraction", c.validation_fraction},
        {"seed", c.seed},
        {"flip_momentum", c.flip_momentum},
        {"beta_init", std::string(to_string(c.beta_init))},
        {"cox_batching", std::string(to_string(c.cox_batching))},
        {"intercept_init", std::string(to_string(c.intercept_init))},
    };
}

FitConfig fit_config_from_json(const json& j) {
    FitConfig c;
    if (j.contains("family")) c.family = parse_family(j["family"].get<std::string>());
    if (j.contains("mlp")) c.mlp = mlp_spec_from_json(j["mlp"]);
    if (j.contains("epochs")) c.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("adam_betas")) {
        c.adam_betas = {j["adam_betas"].at(0).get<double>(), j["adam_betas"].at(1).get<double>()};
    }
    if (j.contains("adam_eps")) c.adam_eps = j["adam_eps"].get<double>();
    if (j.contains("anchoring_weight")) c.anchoring_weight = j["anchoring_weight"].get<double>();
    if (j.contains("index_centering_weight")) {
        c.index_centering_weight = j["index_centering_weight"].get<double>();
    }
    if (j.contains("early_stop_patience")) {
        c.early_stop_patience = j["early_stop_patience"].get<std::size_t>();
    }
    if (j.contains("validation_fraction")) {
        c.validation_fraction = j["validation_fraction"].get<double>();
    }
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("flip_momentum")) c.flip_momentum = j["flip_momentum"].get<bool>();
    if (j.contains("beta_init")) c.beta_init = parse_beta_init(j["beta_init"].get<std::string>());
    if (j.contains("cox_batching")) {
        c.cox_batching = parse_cox_batching(j["cox_batching"].get<std::string>());
    }
    if (j.contains("intercept_init")) {
        c.intercept_init = parse_intercept_init(j["intercept_init"].get<std::string>());
    }
    c.validate();
    return c;
}

// ---- checkpoints ----------------------------------------------------------

namespace {

template <class T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return v;
}

template <class T>
void put(std::ostream& out, T v) {
    v = to_little(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const std::string& what) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
        throw ArgumentError("checkpoint truncated while reading " + what);
    }
    return to_little(v);
}

json block(const std::string& name, std::size_t offset, std::size_t length) {
    return {{"name", name}, {"offset", offset}, {"length", length}};
}

void append(std::vector<double>& payload, const std::vector<double>& v) {
    payload.insert(payload.end(), v.begin(), v.end());
}

std::vector<double> take(const std::vector<double>& payload, const json& blk) {
    const auto off = blk.at("offset").get<std::size_t>();
    const auto len = blk.at("length").get<std::size_t>();
    if (off + len > payload.size()) throw ArgumentError("checkpoint block exceeds payload");
    return {payload.begin() + static_cast<std::ptrdiff_t>(off),
            payload.begin() + static_cast<std::ptrdiff_t>(off + len)};
}

json model_blocks(const ModelParams& m, std::vector<double>& payload) {
    json blocks = json::array();
    blocks.push_back(block("beta", payload.size(), m.beta.size()));
    append(payload, m.beta);
    blocks.push_back(block("gamma", payload.size(), m.gamma.size()));
    append(payload, m.gamma);
    blocks.push_back(block("theta", payload.size(), m.theta.flat.size()));
    append(payload, m.theta.flat);
    return blocks;
}

ModelParams model_from_blocks(const json& blocks, const MlpSpec& spec,
                              const std::vector<double>& payload) {
    ModelParams m;
    m.mlp = spec;
    for (const auto& b : blocks) {
        const auto name = b.at("name").get<std::string>();
        if (name == "beta") m.beta = take(payload, b);
        else if (name == "gamma") m.gamma = take(payload, b);
        else if (name == "theta") m.theta.flat = take(payload, b);
    }
    if (m.theta.flat.size() != spec.param_count()) {
        throw ArgumentError("checkpoint network block does not match its spec");
    }
    m.check_invariants(1e-9);
    return m;
}

} // namespace

void write_raw_checkpoint(const std::filesystem::path& path, const RawCheckpoint& raw) {
    std::ostringstream out(std::ios::binary);
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    const std::string header = raw.header.dump();
    put<std::uint64_t>(out, header.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (double v : raw.payload) put<double>(out, v);
    write_text(path, out.str());
}

RawCheckpoint read_raw_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open checkpoint '" + path.string() + "'");
    char magic[sizeof kCheckpointMagic];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
        throw ArgumentError("'" + path.string() + "' is not a plsinet checkpoint (bad magic)");
    }
    const auto version = get<std::uint32_t>(in, "version");
    if (version != kCheckpointVersion) {
        throw ArgumentError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto len = get<std::uint64_t>(in, "header length");
    if (len > (1u << 26)) throw ArgumentError("checkpoint header length is implausible");
    std::string header(len, '\0');
    if (!in.read(header.data(), static_cast<std::streamsize>(len))) {
        throw ArgumentError("checkpoint truncated in header");
    }
    RawCheckpoint raw;
    try {
        raw.header = json::parse(header);
    } catch (const json::exception& e) {
        throw ArgumentError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }
    const auto count = raw.header.at("payload_length").get<std::size_t>();
    raw.payload.resize(count);
    for (auto& v : raw.payload) v = get<double>(in, "payload");
    if (in.peek() != std::char_traits<char>::eof()) {
        throw ArgumentError("checkpoint has trailing bytes after the payload");
    }
    return raw;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    RawCheckpoint raw;
    json h;
    h["kind"] = "model";
    h["family"] = std::string(to_string(c.family));
    h["mlp"] = to_json(c.params.mlp);
    h["exposures"] = c.exposures;
    h["covariates"] = c.covariates;
    h["intercept"] = c.intercept;
    h["standardized"] = !c.x_mean.empty();
    h["blocks"] = model_blocks(c.params, raw.payload);
    if (!c.x_mean.empty()) {
        h["blocks"].push_back(block("x_mean", raw.payload.size(), c.x_mean.size()));
        append(raw.payload, c.x_mean);
        h["blocks"].push_back(block("x_sd", raw.payload.size(), c.x_sd.size()));
        append(raw.payload, c.x_sd);
    }
    h["extra"] = c.extra;
    h["payload_length"] = raw.payload.size();
    raw.header = std::move(h);
    write_raw_checkpoint(path, raw);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const auto raw = read_raw_checkpoint(path);
    const auto& h = raw.header;
    try {
        if (h.at("kind").get<std::string>() != "model") {
            throw ArgumentError("'" + path.string() + "' holds a " + h["kind"].get<std::string>() +
                                ", not a fitted model");
        }
        Checkpoint c;
        c.family = parse_family(h.at("family").get<std::string>());
        const auto spec = mlp_spec_from_json(h.at("mlp"));
        c.params = model_from_blocks(h.at("blocks"), spec, raw.payload);
        c.exposures = h.at("exposures").get<std::vector<std::string>>();
        c.covariates = h.at("covariates").get<std::vector<std::string>>();
        c.intercept = h.at("intercept").get<bool>();
        for (const auto& b : h.at("blocks")) {
            const auto name = b.at("name").get<std::string>();
            if (name == "x_mean") c.x_mean = take(raw.payload, b);
            if (name == "x_sd") c.x_sd = take(raw.payload, b);
        }
        c.extra = h.value("extra", json::object());
        return c;
    } catch (const json::exception& e) {
        throw ArgumentError("malformed checkpoint header in '" + path.string() + "': " + e.what());
    }
}

void save_bundle(const std::filesystem::path& path, const ModelBundle& b) {
    if (b.models.empty()) throw DomainError("model bundle is empty");
    RawCheckpoint raw;
    json h;
    h["kind"] = "bundle";
    h["mlp"] = to_json(b.models.front().mlp);
    h["ids"] = b.ids;
    h["mirrored"] = b.mirrored;
    json models = json::array();
    for (const auto& m : b.models) {
        if (m.mlp != b.models.front().mlp) throw ShapeError("bundle models must share one spec");
        models.push_back(model_blocks(m, raw.payload));
    }
    h["models"] = std::move(models);
    h["extra"] = b.extra;
    h["payload_length"] = raw.payload.size();
    raw.header = std::move(h);
    write_raw_checkpoint(path, raw);
}

ModelBundle load_bundle(const std::filesystem::path& path) {
    const auto raw = read_raw_checkpoint(path);
    const auto& h = raw.header;
    try {
        if (h.at("kind").get<std::string>() != "bundle") {
            throw ArgumentError("'" + path.string() + "' is not a replicate bundle");
        }
        ModelBundle b;
        const auto spec = mlp_spec_from_json(h.at("mlp"));
        for (const auto& blocks : h.at("models")) {
            b.models.push_back(model_from_blocks(blocks, spec, raw.payload));
        }
        b.ids = h.at("ids").get<std::vector<std::size_t>>();
        b.mirrored = h.at("mirrored").get<std::vector<bool>>();
        b.extra = h.value("extra", json::object());
        return b;
    } catch (const json::exception& e) {
        throw ArgumentError("malformed bundle header in '" + path.string() + "': " + e.what());
    }
}

} // namespace plsinet

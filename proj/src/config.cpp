#include <fimcb/config.hpp>

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

#include <fimcb/errors.hpp>

namespace fimcb {

namespace {

struct Value {
    enum class Kind { Bool, Int, Float, String, Array };
    Kind kind = Kind::Int;
    bool b = false;
    long long i = 0;
    double f = 0.0;
    std::string s;
    std::vector<Value> items;
};

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

/// Strips a trailing comment, honoring double-quoted strings.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (c == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
        if (c == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

struct Cursor {
    const std::string& text;
    std::size_t pos = 0;
    const std::string& where;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError(where + ": " + msg);
    }

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    bool at_end() {
        skip_ws();
        return pos >= text.size();
    }

    char peek() {
        skip_ws();
        if (pos >= text.size()) fail("unexpected end of value");
        return text[pos];
    }
};

Value parse_value(Cursor& cur);

Value parse_string(Cursor& cur) {
    ++cur.pos; // opening quote
    Value v;
    v.kind = Value::Kind::String;
    while (true) {
        if (cur.pos >= cur.text.size()) cur.fail("unterminated string");
        const char c = cur.text[cur.pos++];
        if (c == '"') break;
        if (c == '\\') {
            if (cur.pos >= cur.text.size()) cur.fail("dangling escape in string");
            const char e = cur.text[cur.pos++];
            if (e == '"' || e == '\\') {
                v.s += e;
            } else {
                cur.fail(std::string("unsupported escape \\") + e);
            }
        } else {
            v.s += c;
        }
    }
    return v;
}

Value parse_array(Cursor& cur) {
    ++cur.pos; // opening bracket
    Value v;
    v.kind = Value::Kind::Array;
    cur.skip_ws();
    if (cur.peek() == ']') {
        ++cur.pos;
        return v;
    }
    while (true) {
        v.items.push_back(parse_value(cur));
        const char c = cur.peek();
        if (c == ',') {
            ++cur.pos;
            continue;
        }
        if (c == ']') {
            ++cur.pos;
            return v;
        }
        cur.fail("expected ',' or ']' in array");
    }
}

Value parse_scalar(Cursor& cur) {
    cur.skip_ws();
    std::size_t start = cur.pos;
    while (cur.pos < cur.text.size()) {
        const char c = cur.text[cur.pos];
        if (c == ',' || c == ']' || std::isspace(static_cast<unsigned char>(c))) break;
        ++cur.pos;
    }
    const std::string token = cur.text.substr(start, cur.pos - start);
    if (token.empty()) cur.fail("empty value");
    Value v;
    if (token == "true" || token == "false") {
        v.kind = Value::Kind::Bool;
        v.b = token == "true";
        return v;
    }
    // integer first; everything else numeric becomes a float
    bool is_int = true;
    for (std::size_t i = 0; i < token.size(); ++i) {
        const char c = token[i];
        if (i == 0 && (c == '+' || c == '-')) continue;
        if (!std::isdigit(static_cast<unsigned char>(c))) {
            is_int = false;
            break;
        }
    }
    if (is_int && token != "+" && token != "-") {
        errno = 0;
        char* end = nullptr;
        const long long parsed = std::strtoll(token.c_str(), &end, 10);
        if (errno != 0 || end != token.c_str() + token.size()) {
            cur.fail("integer out of range: " + token);
        }
        v.kind = Value::Kind::Int;
        v.i = parsed;
        v.f = static_cast<double>(parsed);
        return v;
    }
    char* end = nullptr;
    const double parsed = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size()) {
        cur.fail("cannot parse value: " + token);
    }
    v.kind = Value::Kind::Float;
    v.f = parsed;
    return v;
}

Value parse_value(Cursor& cur) {
    const char c = cur.peek();
    if (c == '"') return parse_string(cur);
    if (c == '[') return parse_array(cur);
    return parse_scalar(cur);
}

Value parse_value_text(const std::string& text, const std::string& where) {
    Cursor cur{text, 0, where};
    Value v = parse_value(cur);
    if (!cur.at_end()) cur.fail("trailing characters after value: " + text);
    return v;
}

bool valid_key(const std::string& key) {
    if (key.empty()) return false;
    for (std::size_t i = 0; i < key.size(); ++i) {
        const char c = key[i];
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_';
        if (!ok || (i == 0 && std::isdigit(static_cast<unsigned char>(c)))) return false;
    }
    return true;
}

using Entry = std::pair<std::string, Value>; // full key "section.key"

std::vector<Entry> parse_entries(const std::string& text, const std::string& where) {
    std::vector<Entry> entries;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(strip_comment(raw));
        const std::string at = where + ":" + std::to_string(line_no);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(at + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (!valid_key(section)) {
                throw ConfigError(at + ": bad section name \"" + section + "\"");
            }
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(at + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        if (!valid_key(key)) throw ConfigError(at + ": bad key \"" + key + "\"");
        if (section.empty()) throw ConfigError(at + ": key \"" + key + "\" outside any section");
        entries.emplace_back(section + "." + key, parse_value_text(line.substr(eq + 1), at));
    }
    return entries;
}

long long as_int(const Value& v, const std::string& key) {
    if (v.kind != Value::Kind::Int) {
        throw ConfigError("config key " + key + " must be an integer");
    }
    return v.i;
}

std::uint64_t as_u64(const Value& v, const std::string& key) {
    const long long i = as_int(v, key);
    if (i < 0) throw ConfigError("config key " + key + " must be >= 0");
    return static_cast<std::uint64_t>(i);
}

double as_double(const Value& v, const std::string& key) {
    if (v.kind != Value::Kind::Int && v.kind != Value::Kind::Float) {
        throw ConfigError("config key " + key + " must be a number");
    }
    return v.f;
}

bool as_bool(const Value& v, const std::string& key) {
    if (v.kind != Value::Kind::Bool) {
        throw ConfigError("config key " + key + " must be true or false");
    }
    return v.b;
}

std::string as_string(const Value& v, const std::string& key) {
    if (v.kind != Value::Kind::String) {
        throw ConfigError("config key " + key + " must be a quoted string");
    }
    return v.s;
}

const std::vector<Value>& as_array(const Value& v, const std::string& key) {
    if (v.kind != Value::Kind::Array) {
        throw ConfigError("config key " + key + " must be an array");
    }
    return v.items;
}

Range as_range(const Value& v, const std::string& key) {
    const auto& items = as_array(v, key);
    if (items.size() != 2) throw ConfigError("config key " + key + " must be [lo, hi]");
    return {as_double(items[0], key), as_double(items[1], key)};
}

IntRange as_int_range(const Value& v, const std::string& key) {
    const auto& items = as_array(v, key);
    if (items.size() != 2) throw ConfigError("config key " + key + " must be [lo, hi]");
    return {static_cast<int>(as_int(items[0], key)), static_cast<int>(as_int(items[1], key))};
}

std::vector<double> as_doubles(const Value& v, const std::string& key) {
    const auto& items = as_array(v, key);
    std::vector<double> out;
    for (const auto& item : items) out.push_back(as_double(item, key));
    return out;
}

std::vector<std::string> as_strings(const Value& v, const std::string& key) {
    const auto& items = as_array(v, key);
    std::vector<std::string> out;
    for (const auto& item : items) out.push_back(as_string(item, key));
    return out;
}

void apply_entry(AppConfig& cfg, const std::string& key, const Value& v) {
    auto int_of = [&] { return static_cast<int>(as_int(v, key)); };

    if (key == "run.seed") {
        const std::uint64_t seed = as_u64(v, key);
        cfg.synth.seed = seed;
        cfg.split.seed = seed;
        cfg.grid.base.seed = seed;
    } else if (key == "synth.seed") {
        cfg.synth.seed = as_u64(v, key);
    } else if (key == "synth.n_per_class") {
        cfg.synth.n_per_class = int_of();
    } else if (key == "synth.image_side") {
        cfg.synth.image_side = int_of();
    } else if (key == "synth.chroma_delta") {
        cfg.synth.chroma_delta = as_double(v, key);
    } else if (key == "synth.noise_sigma") {
        cfg.synth.noise_sigma = as_double(v, key);
    } else if (key == "synth.shape_overlap") {
        cfg.synth.shape_overlap = as_double(v, key);
    } else if (key == "synth.n_antibodies") {
        cfg.synth.n_antibodies = int_of();
    } else if (key == "synth.holdout_count") {
        cfg.synth.holdout_count = int_of();
    } else if (key == "synth.base_gray") {
        cfg.synth.base_gray = as_range(v, key);
    } else if (key == "synth.background") {
        cfg.synth.background = as_double(v, key);
    } else if (key == "synth.heat_circularity") {
        cfg.synth.heat.circularity = as_range(v, key);
    } else if (key == "synth.heat_density") {
        cfg.synth.heat.density = as_range(v, key);
    } else if (key == "synth.mech_elongation") {
        cfg.synth.mech.elongation = as_range(v, key);
    } else if (key == "synth.mech_strand_count") {
        cfg.synth.mech.strand_count = as_int_range(v, key);
    } else if (key == "segmentation.light_threshold") {
        cfg.segmentation.light_threshold = as_double(v, key);
    } else if (key == "segmentation.dark_threshold") {
        cfg.segmentation.dark_threshold = as_double(v, key);
    } else if (key == "segmentation.merge_distance_um") {
        cfg.segmentation.merge_distance_um = as_double(v, key);
    } else if (key == "segmentation.crop_margin") {
        cfg.segmentation.margin = int_of();
    } else if (key == "segmentation.calibration_um_per_px") {
        cfg.calibration_um_per_px = as_double(v, key);
    } else if (key == "split.seed") {
        cfg.split.seed = as_u64(v, key);
    } else if (key == "split.val_fraction") {
        cfg.split.val_fraction = as_double(v, key);
    } else if (key == "split.holdout_antibodies") {
        cfg.split.holdout_antibodies = as_strings(v, key);
    } else if (key == "split.min_side") {
        cfg.min_side = int_of();
    } else if (key == "split.preprocess_side") {
        cfg.preprocess_side = int_of();
    } else if (key == "train.seed") {
        cfg.grid.base.seed = as_u64(v, key);
    } else if (key == "train.color_mode") {
        cfg.grid.base.color_mode = ColorMode::parse(as_string(v, key));
    } else if (key == "train.mixed_probs") {
        const auto probs = as_doubles(v, key);
        if (probs.size() != 4) throw ConfigError("config key " + key + " must have 4 entries");
        std::copy(probs.begin(), probs.end(), cfg.mixed_probs.begin());
    } else if (key == "train.batch_size") {
        cfg.grid.base.batch_size = int_of();
    } else if (key == "train.max_epochs") {
        cfg.grid.base.max_epochs = int_of();
    } else if (key == "train.patience") {
        cfg.grid.base.patience = int_of();
    } else if (key == "train.lr_min") {
        cfg.grid.base.schedule.lr_min = as_double(v, key);
    } else if (key == "train.total_epochs") {
        cfg.grid.base.schedule.total_epochs = int_of();
    } else if (key == "train.input_side") {
        cfg.grid.base.input_side = int_of();
    } else if (key == "train.augment_crop") {
        cfg.grid.base.augment.crop = as_bool(v, key);
    } else if (key == "train.augment_flips") {
        cfg.grid.base.augment.flips = as_bool(v, key);
    } else if (key == "train.crop_scale") {
        const Range r = as_range(v, key);
        cfg.grid.base.crop_ranges.scale_lo = r.lo;
        cfg.grid.base.crop_ranges.scale_hi = r.hi;
    } else if (key == "train.crop_aspect") {
        const Range r = as_range(v, key);
        cfg.grid.base.crop_ranges.aspect_lo = r.lo;
        cfg.grid.base.crop_ranges.aspect_hi = r.hi;
    } else if (key == "grid.lrs") {
        cfg.grid.lrs = as_doubles(v, key);
    } else if (key == "grid.weight_decays") {
        cfg.grid.weight_decays = as_doubles(v, key);
    } else if (key == "grid.momenta") {
        cfg.grid.momenta = as_doubles(v, key);
    } else {
        throw ConfigError("unknown config key: " + key);
    }
}

void validate_app_config(const AppConfig& cfg) {
    validate(cfg.synth);
    if (!(cfg.segmentation.light_threshold > 0.0) || !(cfg.segmentation.dark_threshold > 0.0)) {
        throw ConfigError("segmentation thresholds must be positive");
    }
    if (cfg.segmentation.merge_distance_um < 0.0) {
        throw ConfigError("segmentation.merge_distance_um must be >= 0");
    }
    if (cfg.segmentation.margin < 0) {
        throw ConfigError("segmentation.crop_margin must be >= 0");
    }
    if (cfg.calibration_um_per_px < 0.0) {
        throw ConfigError("segmentation.calibration_um_per_px must be >= 0");
    }
    if (!(cfg.split.val_fraction > 0.0) || !(cfg.split.val_fraction < 1.0)) {
        throw ConfigError("split.val_fraction must be in (0, 1)");
    }
    if (cfg.min_side < 0) throw ConfigError("split.min_side must be >= 0");
    if (cfg.preprocess_side < 8) throw ConfigError("split.preprocess_side must be >= 8");

    const TrainConfig& t = cfg.grid.base;
    if (t.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (t.max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
    if (t.patience < 1) throw ConfigError("train.patience must be >= 1");
    if (t.input_side < 8) throw ConfigError("train.input_side must be >= 8");
    if (t.schedule.lr_min < 0.0) throw ConfigError("train.lr_min must be >= 0");
    if (t.schedule.total_epochs < 1) throw ConfigError("train.total_epochs must be >= 1");
    if (t.max_epochs - 1 > t.schedule.total_epochs) {
        throw ConfigError("train.max_epochs exceeds the cosine schedule length");
    }
    if (!(t.crop_ranges.scale_lo > 0.0) || t.crop_ranges.scale_lo > t.crop_ranges.scale_hi ||
        !(t.crop_ranges.aspect_lo > 0.0) || t.crop_ranges.aspect_lo > t.crop_ranges.aspect_hi) {
        throw ConfigError("train crop ranges must satisfy 0 < lo <= hi");
    }
    validate(ColorMode::mixed(cfg.mixed_probs));

    if (cfg.grid.lrs.empty() || cfg.grid.weight_decays.empty() || cfg.grid.momenta.empty()) {
        throw ConfigError("grid hyperparameter sets must be nonempty");
    }
    for (double lr : cfg.grid.lrs) {
        if (!(lr > 0.0)) throw ConfigError("grid.lrs entries must be positive");
    }
    for (double wd : cfg.grid.weight_decays) {
        if (wd < 0.0) throw ConfigError("grid.weight_decays entries must be >= 0");
    }
    for (double m : cfg.grid.momenta) {
        if (m < 0.0 || m >= 1.0) throw ConfigError("grid.momenta entries must be in [0, 1)");
    }
}

AppConfig build_config(const std::vector<Entry>& file_entries,
                       const std::vector<std::string>& overrides) {
    AppConfig cfg = default_app_config();
    for (const auto& [key, value] : file_entries) apply_entry(cfg, key, value);
    for (const auto& text : overrides) {
        const std::size_t eq = text.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("--set expects section.key=value, got \"" + text + "\"");
        }
        const std::string key = trim(text.substr(0, eq));
        if (key.find('.') == std::string::npos) {
            throw ConfigError("--set key must be section.key, got \"" + key + "\"");
        }
        apply_entry(cfg, key, parse_value_text(text.substr(eq + 1), "--set " + key));
    }
    // mixed_probs may arrive after color_mode; rebuild the mode so they agree
    if (cfg.grid.base.color_mode.kind == ColorMode::Kind::Mixed) {
        cfg.grid.base.color_mode = ColorMode::mixed(cfg.mixed_probs);
    }
    validate_app_config(cfg);
    return cfg;
}

std::string num(double v) { return nlohmann::json(v).dump(); }

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    out += '"';
    return out;
}

std::string num_list(const std::vector<double>& values) {
    std::string out = "[";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ", ";
        out += num(values[i]);
    }
    return out + "]";
}

std::string range_of(const Range& r) { return "[" + num(r.lo) + ", " + num(r.hi) + "]"; }

} // namespace

AppConfig default_app_config() { return AppConfig{}; }

AppConfig load_app_config(const std::optional<std::filesystem::path>& file,
                          const std::vector<std::string>& overrides) {
    std::vector<Entry> entries;
    if (file) {
        std::ifstream in(*file, std::ios::binary);
        if (!in) {
            throw ConfigError("cannot open config file: " + file->string());
        }
        std::stringstream buffer;
        buffer << in.rdbuf();
        entries = parse_entries(buffer.str(), file->string());
    }
    return build_config(entries, overrides);
}

AppConfig parse_app_config(const std::string& text, const std::vector<std::string>& overrides) {
    return build_config(parse_entries(text, "<config>"), overrides);
}

std::string dump_app_config(const AppConfig& cfg) {
    std::ostringstream out;
    out << "[synth]\n";
    out << "seed = " << cfg.synth.seed << "\n";
    out << "n_per_class = " << cfg.synth.n_per_class << "\n";
    out << "image_side = " << cfg.synth.image_side << "\n";
    out << "chroma_delta = " << num(cfg.synth.chroma_delta) << "\n";
    out << "noise_sigma = " << num(cfg.synth.noise_sigma) << "\n";
    out << "shape_overlap = " << num(cfg.synth.shape_overlap) << "\n";
    out << "n_antibodies = " << cfg.synth.n_antibodies << "\n";
    out << "holdout_count = " << cfg.synth.holdout_count << "\n";
    out << "base_gray = " << range_of(cfg.synth.base_gray) << "\n";
    out << "background = " << num(cfg.synth.background) << "\n";
    out << "heat_circularity = " << range_of(cfg.synth.heat.circularity) << "\n";
    out << "heat_density = " << range_of(cfg.synth.heat.density) << "\n";
    out << "mech_elongation = " << range_of(cfg.synth.mech.elongation) << "\n";
    out << "mech_strand_count = [" << cfg.synth.mech.strand_count.lo << ", "
        << cfg.synth.mech.strand_count.hi << "]\n";
    out << "\n[segmentation]\n";
    out << "light_threshold = " << num(cfg.segmentation.light_threshold) << "\n";
    out << "dark_threshold = " << num(cfg.segmentation.dark_threshold) << "\n";
    out << "merge_distance_um = " << num(cfg.segmentation.merge_distance_um) << "\n";
    out << "crop_margin = " << cfg.segmentation.margin << "\n";
    out << "calibration_um_per_px = " << num(cfg.calibration_um_per_px) << "\n";
    out << "\n[split]\n";
    out << "seed = " << cfg.split.seed << "\n";
    out << "val_fraction = " << num(cfg.split.val_fraction) << "\n";
    out << "holdout_antibodies = [";
    for (std::size_t i = 0; i < cfg.split.holdout_antibodies.size(); ++i) {
        if (i) out << ", ";
        out << quote(cfg.split.holdout_antibodies[i]);
    }
    out << "]\n";
    out << "min_side = " << cfg.min_side << "\n";
    out << "preprocess_side = " << cfg.preprocess_side << "\n";
    const TrainConfig& t = cfg.grid.base;
    out << "\n[train]\n";
    out << "seed = " << t.seed << "\n";
    out << "color_mode = " << quote(t.color_mode.name()) << "\n";
    out << "mixed_probs = [" << num(cfg.mixed_probs[0]) << ", " << num(cfg.mixed_probs[1])
        << ", " << num(cfg.mixed_probs[2]) << ", " << num(cfg.mixed_probs[3]) << "]\n";
    out << "batch_size = " << t.batch_size << "\n";
    out << "max_epochs = " << t.max_epochs << "\n";
    out << "patience = " << t.patience << "\n";
    out << "lr_min = " << num(t.schedule.lr_min) << "\n";
    out << "total_epochs = " << t.schedule.total_epochs << "\n";
    out << "input_side = " << t.input_side << "\n";
    out << "augment_crop = " << (t.augment.crop ? "true" : "false") << "\n";
    out << "augment_flips = " << (t.augment.flips ? "true" : "false") << "\n";
    out << "crop_scale = [" << num(t.crop_ranges.scale_lo) << ", " << num(t.crop_ranges.scale_hi)
        << "]\n";
    out << "crop_aspect = [" << num(t.crop_ranges.aspect_lo) << ", "
        << num(t.crop_ranges.aspect_hi) << "]\n";
    out << "\n[grid]\n";
    out << "lrs = " << num_list(cfg.grid.lrs) << "\n";
    out << "weight_decays = " << num_list(cfg.grid.weight_decays) << "\n";
    out << "momenta = " << num_list(cfg.grid.momenta) << "\n";
    return out.str();
}

} // namespace fimcb

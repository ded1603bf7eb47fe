#include <fimcb/dataset.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <fimcb/errors.hpp>
#include <fimcb/imageops.hpp>
#include <fimcb/png_io.hpp>
#include <fimcb/rng.hpp>

namespace fimcb {

namespace {

constexpr const char* kHeaderTag = "#FIMCB-MANIFEST ";
constexpr const char* kColumns = "id,antibody,stress,replicate,image_path,width,height,split";

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current += c;
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::string record_line(const ParticleRecord& r) {
    std::ostringstream out;
    out << csv_escape(r.id) << ',' << csv_escape(r.antibody) << ',' << to_string(r.stress) << ','
        << r.replicate << ',' << csv_escape(r.image_path) << ',' << r.width << ',' << r.height
        << ',' << to_string(r.split);
    return out.str();
}

int parse_int_field(const std::string& text, const char* what) {
    try {
        std::size_t pos = 0;
        const int value = std::stoi(text, &pos);
        if (pos != text.size()) throw std::invalid_argument(text);
        return value;
    } catch (const std::exception&) {
        throw ConfigError(std::string("manifest: bad ") + what + " value \"" + text + "\"");
    }
}

std::string checksum_hex(std::uint64_t checksum) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(checksum));
    return std::string(buf);
}

} // namespace

std::string to_string(Stress stress) {
    return stress == Stress::Heat ? "Heat" : "Mechanical";
}

std::string to_string(Split split) {
    switch (split) {
        case Split::Train: return "Train";
        case Split::Val: return "Val";
        case Split::Unassigned: return "Unassigned";
    }
    return "Unassigned";
}

Stress parse_stress(const std::string& text) {
    if (text == "Heat") return Stress::Heat;
    if (text == "Mechanical") return Stress::Mechanical;
    throw ConfigError("unknown stress label: \"" + text + "\"");
}

Split parse_split(const std::string& text) {
    if (text == "Train") return Split::Train;
    if (text == "Val") return Split::Val;
    if (text == "Unassigned") return Split::Unassigned;
    throw ConfigError("unknown split: \"" + text + "\"");
}

std::vector<std::string> Manifest::holdout_antibodies() const {
    std::vector<std::string> out;
    if (params.contains("holdout_antibodies") && params["holdout_antibodies"].is_array()) {
        for (const auto& v : params["holdout_antibodies"]) {
            out.push_back(v.get<std::string>());
        }
    }
    return out;
}

std::vector<ParticleRecord> filter_min_size(const std::vector<ParticleRecord>& records,
                                            int min_side) {
    std::vector<ParticleRecord> kept;
    kept.reserve(records.size());
    for (const ParticleRecord& r : records) {
        if (r.width > min_side && r.height > min_side) {
            kept.push_back(r);
        }
    }
    return kept;
}

Manifest stratified_split(std::vector<ParticleRecord> records, const SplitSpec& spec) {
    if (!(spec.val_fraction > 0.0 && spec.val_fraction < 1.0)) {
        throw ConfigError("stratified_split: val_fraction must be in (0,1)");
    }
    std::unordered_set<std::string> ids;
    for (const ParticleRecord& r : records) {
        if (r.split != Split::Unassigned) {
            throw ConfigError("stratified_split: record \"" + r.id + "\" already assigned");
        }
        if (!ids.insert(r.id).second) {
            throw ConfigError("stratified_split: duplicate record id \"" + r.id + "\"");
        }
    }

    const std::unordered_set<std::string> holdout(spec.holdout_antibodies.begin(),
                                                  spec.holdout_antibodies.end());
    for (const std::string& label : holdout) {
        const bool present = std::any_of(records.begin(), records.end(),
                                         [&](const ParticleRecord& r) { return r.antibody == label; });
        if (!present) {
            throw ConfigError("stratified_split: holdout antibody \"" + label +
                              "\" matches no record");
        }
    }

    // Group non-holdout records by (antibody, stress); ordered map keeps the
    // processing order independent of input order.
    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < records.size(); ++i) {
        ParticleRecord& r = records[i];
        if (holdout.count(r.antibody) > 0) {
            r.split = Split::Val;
        } else {
            groups[{r.antibody, to_string(r.stress)}].push_back(i);
        }
    }

    for (auto& [key, indices] : groups) {
        if (indices.size() < 2) {
            throw ConfigError("stratified_split: group (" + key.first + ", " + key.second +
                              ") has fewer than 2 records");
        }
        // Per-group stream derived from the group key, so assignment does not
        // depend on which other groups exist. The id sort before the shuffle
        // makes membership independent of the input record order too.
        Rng rng(mix_seed(spec.seed, fnv1a64(key.first + "\x1f" + key.second)));
        std::vector<std::size_t> order = indices;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return records[a].id < records[b].id;
        });
        for (std::size_t i = order.size() - 1; i > 0; --i) {
            const std::size_t j = rng.uniform_int(i + 1);
            std::swap(order[i], order[j]);
        }
        const auto val_count = static_cast<std::size_t>(
            std::floor(static_cast<double>(order.size()) * spec.val_fraction + 0.5));
        for (std::size_t i = 0; i < order.size(); ++i) {
            records[order[i]].split = i < val_count ? Split::Val : Split::Train;
        }
    }

    Manifest manifest;
    manifest.records = std::move(records);
    manifest.seed = spec.seed;
    manifest.params["val_fraction"] = spec.val_fraction;
    manifest.params["holdout_antibodies"] = spec.holdout_antibodies;
    return manifest;
}

PreprocessResult preprocess_all(const Manifest& manifest, const std::filesystem::path& data_root,
                                const std::filesystem::path& out_dir, int side) {
    if (side < 1) {
        throw ConfigError("preprocess_all: side must be >= 1");
    }
    PreprocessResult result;
    result.manifest.seed = manifest.seed;
    result.manifest.params = manifest.params;
    result.manifest.params["preprocess_side"] = side;

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("cannot create output dir: " + out_dir.string());
    }

    for (const ParticleRecord& r : manifest.records) {
        try {
            const RGBImage img = read_png_rgb(data_root / r.image_path);
            const RGBImage processed = pad_to_square(resize_largest_edge(img, side), side);

            const std::filesystem::path rel = std::filesystem::path(r.antibody) /
                                              to_string(r.stress) / (r.id + ".png");
            std::filesystem::create_directories(out_dir / rel.parent_path(), ec);
            if (ec) {
                throw IoError("cannot create dir: " + (out_dir / rel.parent_path()).string());
            }
            write_png_rgb(out_dir / rel, processed);

            ParticleRecord updated = r;
            updated.image_path = rel.generic_string();
            updated.width = processed.width();
            updated.height = processed.height();
            result.manifest.records.push_back(std::move(updated));
        } catch (const std::exception& e) {
            result.errors.emplace_back(r.id, e.what());
        }
    }
    return result;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    std::unordered_set<std::string> seen;
    for (const ParticleRecord& r : manifest.records) {
        if (!seen.insert(r.id).second) {
            throw ConfigError("manifest: duplicate record id \"" + r.id + "\"");
        }
    }

    std::string body;
    for (const ParticleRecord& r : manifest.records) {
        body += record_line(r);
        body += '\n';
    }

    nlohmann::ordered_json header;
    header["version"] = 1;
    header["seed"] = manifest.seed;
    header["checksum"] = checksum_hex(fnv1a64(body));
    header["params"] = manifest.params;

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open for writing: " + path.string());
    }
    out << kHeaderTag << header.dump() << '\n' << kColumns << '\n' << body;
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open manifest: " + path.string());
    }
    std::string header_line;
    if (!std::getline(in, header_line) || header_line.rfind(kHeaderTag, 0) != 0) {
        throw ConfigError("not a manifest file: " + path.string());
    }
    nlohmann::ordered_json header;
    try {
        header = nlohmann::ordered_json::parse(header_line.substr(std::string(kHeaderTag).size()));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("manifest header is not valid JSON: " + std::string(e.what()));
    }

    std::string columns;
    if (!std::getline(in, columns) || columns != kColumns) {
        throw ConfigError("manifest column header mismatch in " + path.string());
    }

    Manifest manifest;
    manifest.seed = header.value("seed", std::uint64_t{0});
    if (header.contains("params")) {
        manifest.params = header["params"];
    }

    std::string body;
    std::string line;
    std::unordered_set<std::string> seen;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        body += line;
        body += '\n';
        const auto fields = csv_split(line);
        if (fields.size() != 8) {
            throw ConfigError("manifest row with " + std::to_string(fields.size()) +
                              " fields (want 8)");
        }
        ParticleRecord r;
        r.id = fields[0];
        r.antibody = fields[1];
        r.stress = parse_stress(fields[2]);
        r.replicate = parse_int_field(fields[3], "replicate");
        r.image_path = fields[4];
        r.width = parse_int_field(fields[5], "width");
        r.height = parse_int_field(fields[6], "height");
        r.split = parse_split(fields[7]);
        if (r.width < 1 || r.height < 1) {
            throw ConfigError("manifest: record \"" + r.id + "\" has non-positive dims");
        }
        if (r.antibody.empty()) {
            throw ConfigError("manifest: record \"" + r.id + "\" has empty antibody");
        }
        if (!seen.insert(r.id).second) {
            throw ConfigError("manifest: duplicate record id \"" + r.id + "\"");
        }
        manifest.records.push_back(std::move(r));
    }

    const std::string expected = header.value("checksum", std::string{});
    if (expected != checksum_hex(fnv1a64(body))) {
        throw ConfigError("manifest checksum mismatch: " + path.string());
    }
    return manifest;
}

} // namespace fimcb

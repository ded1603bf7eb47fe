#include <fimcb/eval.hpp>

#include <algorithm>
#include <cstdio>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace fimcb {

namespace {

struct ColumnKey {
    std::optional<Stress> stress; // empty for the overall column
    std::string antibody;
};

/// Antibody order inside a block: shorter labels first, then lexicographic,
/// so mAb2 sorts before mAb10.
bool antibody_less(const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
}

std::string format_ratio(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

struct Cell {
    std::optional<double> value;
    char mark = ' '; // '*', '+', or ' '
};

/// Marks the max with '*' and (only when the max is unique) the highest
/// remaining value with '+'.
void mark_column(std::vector<Cell*>& cells) {
    std::vector<Cell*> present;
    for (Cell* c : cells) {
        if (c->value) present.push_back(c);
    }
    if (present.empty()) return;
    double best = -1.0;
    for (Cell* c : present) best = std::max(best, *c->value);
    int best_holders = 0;
    for (Cell* c : present) {
        if (*c->value == best) {
            c->mark = '*';
            ++best_holders;
        }
    }
    if (best_holders != 1 || present.size() < 2) return;
    double second = -1.0;
    for (Cell* c : present) {
        if (*c->value < best) second = std::max(second, *c->value);
    }
    for (Cell* c : present) {
        if (c->mark == ' ' && *c->value == second) c->mark = '+';
    }
}

} // namespace

double accuracy(const std::vector<Prediction>& preds) {
    if (preds.empty()) {
        throw std::invalid_argument("accuracy: empty prediction list");
    }
    std::size_t correct = 0;
    for (const auto& p : preds) {
        if (p.predicted == p.truth) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

std::map<std::string, double> per_antibody_tpr(const std::vector<Prediction>& preds,
                                               const Manifest& manifest) {
    std::unordered_map<std::string, const ParticleRecord*> by_id;
    by_id.reserve(manifest.records.size());
    for (const auto& r : manifest.records) by_id.emplace(r.id, &r);

    std::map<std::string, std::pair<std::size_t, std::size_t>> counts; // correct, total
    for (const auto& p : preds) {
        auto it = by_id.find(p.id);
        if (it == by_id.end()) {
            throw std::invalid_argument("per_antibody_tpr: unknown record id \"" + p.id + "\"");
        }
        auto& [correct, total] = counts[it->second->antibody];
        ++total;
        if (p.predicted == p.truth) ++correct;
    }
    std::map<std::string, double> out;
    for (const auto& [antibody, c] : counts) {
        out[antibody] = static_cast<double>(c.first) / static_cast<double>(c.second);
    }
    return out;
}

ReportFiles render_report(const std::vector<ModeEval>& modes, const Manifest& manifest) {
    if (modes.empty()) {
        throw std::invalid_argument("render_report: need at least one mode");
    }

    std::unordered_map<std::string, const ParticleRecord*> by_id;
    by_id.reserve(manifest.records.size());
    for (const auto& r : manifest.records) by_id.emplace(r.id, &r);

    // Column layout: overall, then the heat block, then the mechanical block.
    // An antibody appears in a block when the manifest has Val records of
    // that (antibody, stress) group.
    std::vector<std::string> heat_abs;
    std::vector<std::string> mech_abs;
    for (const auto& r : manifest.records) {
        if (r.split != Split::Val) continue;
        auto& list = r.stress == Stress::Heat ? heat_abs : mech_abs;
        if (std::find(list.begin(), list.end(), r.antibody) == list.end()) {
            list.push_back(r.antibody);
        }
    }
    std::sort(heat_abs.begin(), heat_abs.end(), antibody_less);
    std::sort(mech_abs.begin(), mech_abs.end(), antibody_less);

    std::vector<ColumnKey> columns;
    columns.push_back({std::nullopt, ""});
    for (const auto& ab : heat_abs) columns.push_back({Stress::Heat, ab});
    for (const auto& ab : mech_abs) columns.push_back({Stress::Mechanical, ab});

    // grid[row][col]
    std::vector<std::vector<Cell>> grid(modes.size(), std::vector<Cell>(columns.size()));
    for (std::size_t row = 0; row < modes.size(); ++row) {
        const ModeEval& me = modes[row];
        grid[row][0].value = me.overall_accuracy;
        // correct/total per (stress, antibody) among this mode's predictions
        std::map<std::pair<int, std::string>, std::pair<std::size_t, std::size_t>> counts;
        for (const auto& p : me.preds) {
            auto it = by_id.find(p.id);
            if (it == by_id.end()) {
                throw std::invalid_argument("render_report: unknown record id \"" + p.id + "\"");
            }
            auto& [correct, total] =
                counts[{static_cast<int>(p.truth), it->second->antibody}];
            ++total;
            if (p.predicted == p.truth) ++correct;
        }
        for (std::size_t col = 1; col < columns.size(); ++col) {
            const auto& key = columns[col];
            auto it = counts.find({static_cast<int>(*key.stress), key.antibody});
            if (it != counts.end()) {
                grid[row][col].value = static_cast<double>(it->second.first) /
                                       static_cast<double>(it->second.second);
            }
        }
    }

    for (std::size_t col = 0; col < columns.size(); ++col) {
        std::vector<Cell*> cells;
        for (std::size_t row = 0; row < modes.size(); ++row) {
            cells.push_back(&grid[row][col]);
        }
        mark_column(cells);
    }

    auto header_of = [](const ColumnKey& key) -> std::string {
        if (!key.stress) return "overall";
        return (*key.stress == Stress::Heat ? std::string("heat:") : std::string("mech:")) +
               key.antibody;
    };

    std::ostringstream csv;
    csv << "mode";
    for (const auto& key : columns) {
        const std::string h = header_of(key);
        csv << ',' << h << ',' << h << "_mark";
    }
    csv << '\n';
    for (std::size_t row = 0; row < modes.size(); ++row) {
        csv << modes[row].mode;
        for (std::size_t col = 0; col < columns.size(); ++col) {
            const Cell& c = grid[row][col];
            csv << ',';
            if (c.value) csv << format_ratio(*c.value);
            csv << ',';
            if (c.mark != ' ') csv << c.mark;
        }
        csv << '\n';
    }

    // Aligned text table. Cell text is the value with its mark appended.
    std::vector<std::string> headers{"mode"};
    for (const auto& key : columns) headers.push_back(header_of(key));
    std::vector<std::vector<std::string>> text_rows;
    for (std::size_t row = 0; row < modes.size(); ++row) {
        std::vector<std::string> cells{modes[row].mode};
        for (std::size_t col = 0; col < columns.size(); ++col) {
            const Cell& c = grid[row][col];
            std::string s = c.value ? format_ratio(*c.value) : "-";
            if (c.mark != ' ') s += c.mark;
            cells.push_back(s);
        }
        text_rows.push_back(std::move(cells));
    }
    std::vector<std::size_t> widths(headers.size());
    for (std::size_t i = 0; i < headers.size(); ++i) {
        widths[i] = headers[i].size();
        for (const auto& r : text_rows) widths[i] = std::max(widths[i], r[i].size());
    }
    std::ostringstream text;
    auto emit_row = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            text << cells[i];
            if (i + 1 < cells.size()) {
                text << std::string(widths[i] - cells[i].size() + 2, ' ');
            }
        }
        text << '\n';
    };
    emit_row(headers);
    for (const auto& r : text_rows) emit_row(r);
    text << "\n* column max, + second best; a tied max marks all holders and leaves + unassigned\n";

    return {csv.str(), text.str()};
}

} // namespace fimcb

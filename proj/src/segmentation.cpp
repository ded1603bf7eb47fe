#include <fimcb/segmentation.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fimcb/imageops.hpp>

namespace fimcb {

namespace {

void require_frame(const RawFrame& frame, const char* func) {
    if (frame.image.empty()) {
        throw std::invalid_argument(std::string(func) + ": empty frame");
    }
    if (!(frame.calibration_um_per_px > 0.0)) {
        throw std::invalid_argument(std::string(func) + ": calibration must be > 0");
    }
}

// Union-find over component indices.
class DisjointSet {
public:
    explicit DisjointSet(std::size_t n) : parent_(n) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }

    std::size_t find(std::size_t i) {
        while (parent_[i] != i) {
            parent_[i] = parent_[parent_[i]];
            i = parent_[i];
        }
        return i;
    }

    void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

private:
    std::vector<std::size_t> parent_;
};

// Gap distance lower bound between two bounding boxes, in pixels.
double bbox_gap_distance(const BoundingBox& a, const BoundingBox& b) {
    const int dx = std::max({0, a.x0 - b.x1 - 1, b.x0 - a.x1 - 1});
    const int dy = std::max({0, a.y0 - b.y1 - 1, b.y0 - a.y1 - 1});
    return std::sqrt(static_cast<double>(dx) * dx + static_cast<double>(dy) * dy);
}

// Minimum pairwise gap distance between two pixel sets, with early exit once
// a pair at or below `enough` is found.
double min_component_distance(const std::vector<PixelCoord>& a, const std::vector<PixelCoord>& b,
                              double enough) {
    double best = std::numeric_limits<double>::infinity();
    for (const PixelCoord& p : a) {
        for (const PixelCoord& q : b) {
            const double d = pixel_gap_distance(p, q);
            if (d < best) {
                best = d;
                if (best <= enough) {
                    return best;
                }
            }
        }
    }
    return best;
}

} // namespace

double pixel_gap_distance(const PixelCoord& a, const PixelCoord& b) {
    const int dx = std::max(0, std::abs(a.x - b.x) - 1);
    const int dy = std::max(0, std::abs(a.y - b.y) - 1);
    return std::sqrt(static_cast<double>(dx) * dx + static_cast<double>(dy) * dy);
}

BackgroundModel calibrate_background(const std::vector<RawFrame>& frames) {
    if (frames.empty()) {
        throw std::invalid_argument("calibrate_background: no frames");
    }
    const int w = frames.front().image.width();
    const int h = frames.front().image.height();
    std::vector<GrayImage> lumas;
    lumas.reserve(frames.size());
    for (const RawFrame& frame : frames) {
        require_frame(frame, "calibrate_background");
        if (frame.image.width() != w || frame.image.height() != h) {
            throw std::invalid_argument("calibrate_background: mismatched frame dimensions");
        }
        lumas.push_back(luma_grayscale(frame.image));
    }

    BackgroundModel model(w, h);
    std::vector<std::uint8_t> site(lumas.size());
    const std::size_t mid = (site.size() - 1) / 2; // lower median
    for (std::size_t i = 0; i < model.data().size(); ++i) {
        for (std::size_t f = 0; f < lumas.size(); ++f) {
            site[f] = lumas[f].data()[i];
        }
        std::nth_element(site.begin(), site.begin() + static_cast<std::ptrdiff_t>(mid), site.end());
        model.data()[i] = site[mid];
    }
    return model;
}

std::vector<ParticleBlob> detect_particles(const RawFrame& frame, const BackgroundModel& background,
                                           const SegmentationConfig& config) {
    require_frame(frame, "detect_particles");
    if (frame.image.width() != background.width() || frame.image.height() != background.height()) {
        throw std::invalid_argument("detect_particles: frame and background dims differ");
    }
    if (config.light_threshold < 0.0 || config.dark_threshold < 0.0 ||
        config.merge_distance_um < 0.0) {
        throw std::invalid_argument("detect_particles: thresholds must be >= 0");
    }

    const int w = frame.image.width();
    const int h = frame.image.height();
    const GrayImage luma = luma_grayscale(frame.image);

    std::vector<bool> flagged(static_cast<std::size_t>(w) * h, false);
    for (std::size_t i = 0; i < flagged.size(); ++i) {
        const double signal = static_cast<double>(luma.data()[i]);
        const double reference = static_cast<double>(background.data()[i]);
        flagged[i] = (signal - reference > config.light_threshold) ||
                     (reference - signal > config.dark_threshold);
    }

    // 8-connected component labeling by flood fill.
    std::vector<int> label(flagged.size(), -1);
    std::vector<std::vector<PixelCoord>> components;
    std::vector<PixelCoord> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            if (!flagged[idx] || label[idx] >= 0) {
                continue;
            }
            const int id = static_cast<int>(components.size());
            components.emplace_back();
            stack.clear();
            stack.push_back({x, y});
            label[idx] = id;
            while (!stack.empty()) {
                const PixelCoord p = stack.back();
                stack.pop_back();
                components[static_cast<std::size_t>(id)].push_back(p);
                for (int ny = p.y - 1; ny <= p.y + 1; ++ny) {
                    for (int nx = p.x - 1; nx <= p.x + 1; ++nx) {
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
                        if (flagged[nidx] && label[nidx] < 0) {
                            label[nidx] = id;
                            stack.push_back({nx, ny});
                        }
                    }
                }
            }
        }
    }

    std::vector<BoundingBox> boxes(components.size());
    for (std::size_t c = 0; c < components.size(); ++c) {
        BoundingBox box{w, h, -1, -1};
        for (const PixelCoord& p : components[c]) {
            box.x0 = std::min(box.x0, p.x);
            box.y0 = std::min(box.y0, p.y);
            box.x1 = std::max(box.x1, p.x);
            box.y1 = std::max(box.y1, p.y);
        }
        boxes[c] = box;
    }

    // Transitive merge of components within merge_distance_um. Distances are
    // measured in pixels and converted via the frame calibration; the bbox
    // gap is a lower bound that prunes far pairs.
    const double merge_px = config.merge_distance_um / frame.calibration_um_per_px;
    DisjointSet sets(components.size());
    for (std::size_t a = 0; a < components.size(); ++a) {
        for (std::size_t b = a + 1; b < components.size(); ++b) {
            if (bbox_gap_distance(boxes[a], boxes[b]) > merge_px) {
                continue;
            }
            if (min_component_distance(components[a], components[b], merge_px) <= merge_px) {
                sets.unite(a, b);
            }
        }
    }

    std::vector<int> root_to_blob(components.size(), -1);
    std::vector<ParticleBlob> blobs;
    for (std::size_t c = 0; c < components.size(); ++c) {
        const std::size_t root = sets.find(c);
        if (root_to_blob[root] < 0) {
            root_to_blob[root] = static_cast<int>(blobs.size());
            blobs.emplace_back();
        }
        auto& blob = blobs[static_cast<std::size_t>(root_to_blob[root])];
        blob.pixels.insert(blob.pixels.end(), components[c].begin(), components[c].end());
    }

    for (ParticleBlob& blob : blobs) {
        std::sort(blob.pixels.begin(), blob.pixels.end(),
                  [](const PixelCoord& a, const PixelCoord& b) {
                      return a.y != b.y ? a.y < b.y : a.x < b.x;
                  });
        BoundingBox box{w, h, -1, -1};
        for (const PixelCoord& p : blob.pixels) {
            box.x0 = std::min(box.x0, p.x);
            box.y0 = std::min(box.y0, p.y);
            box.x1 = std::max(box.x1, p.x);
            box.y1 = std::max(box.y1, p.y);
        }
        blob.bbox = box;
    }

    std::sort(blobs.begin(), blobs.end(), [](const ParticleBlob& a, const ParticleBlob& b) {
        if (a.bbox.y0 != b.bbox.y0) return a.bbox.y0 < b.bbox.y0;
        return a.bbox.x0 < b.bbox.x0;
    });
    return blobs;
}

RGBImage crop_particle(const RawFrame& frame, const ParticleBlob& blob, int margin) {
    require_frame(frame, "crop_particle");
    if (blob.pixels.empty()) {
        throw std::invalid_argument("crop_particle: empty blob");
    }
    if (margin < 0) {
        throw std::invalid_argument("crop_particle: margin must be >= 0");
    }
    const int w = frame.image.width();
    const int h = frame.image.height();
    const BoundingBox& box = blob.bbox;
    if (box.x0 < 0 || box.y0 < 0 || box.x1 >= w || box.y1 >= h || box.x0 > box.x1 ||
        box.y0 > box.y1) {
        throw std::invalid_argument("crop_particle: blob outside frame bounds");
    }
    const int x0 = std::max(0, box.x0 - margin);
    const int y0 = std::max(0, box.y0 - margin);
    const int x1 = std::min(w - 1, box.x1 + margin);
    const int y1 = std::min(h - 1, box.y1 + margin);
    return crop(frame.image, x0, y0, x1 - x0 + 1, y1 - y0 + 1);
}

} // namespace fimcb

#include "pointattn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pointattn/rng.hpp"

namespace pointattn::synth {

SceneClass scene_class_from_name(const std::string& name) {
    if (name == "ground") return SceneClass::kGround;
    if (name == "roof") return SceneClass::kRoof;
    if (name == "facade") return SceneClass::kFacade;
    if (name == "tree") return SceneClass::kTree;
    if (name == "car") return SceneClass::kCar;
    if (name == "powerline") return SceneClass::kPowerline;
    throw std::invalid_argument("unknown scene class '" + name +
                                "' (ground, roof, facade, tree, car, powerline)");
}

std::string scene_class_name(SceneClass c) {
    switch (c) {
        case SceneClass::kGround: return "ground";
        case SceneClass::kRoof: return "roof";
        case SceneClass::kFacade: return "facade";
        case SceneClass::kTree: return "tree";
        case SceneClass::kCar: return "car";
        case SceneClass::kPowerline: return "powerline";
    }
    throw std::logic_error("bad scene class");
}

void SceneSpec::validate() const {
    if (classes.empty()) throw std::invalid_argument("scene spec: class set must not be empty");
    if (extent <= 0.0) throw std::invalid_argument("scene spec: extent must be positive");
    if (density <= 0.0) throw std::invalid_argument("scene spec: density must be positive");
    if (noise_sigma < 0.0) throw std::invalid_argument("scene spec: noise sigma must be >= 0");
    for (size_t i = 0; i < classes.size(); ++i) {
        for (size_t j = i + 1; j < classes.size(); ++j) {
            if (classes[i] == classes[j]) throw std::invalid_argument("scene spec: duplicate class");
        }
    }
}

namespace {

using pipeline::PointRecord;

// Two building footprints shared by roof and facade so that walls always
// sit under roof edges. Everything scales with the extent except object
// heights, which stay metric.
struct Building {
    double x0, x1, y0, y1, height;
};

std::vector<Building> buildings(double e) {
    return {{0.175 * e, 0.425 * e, 0.20 * e, 0.40 * e, 6.0},
            {0.575 * e, 0.825 * e, 0.55 * e, 0.75 * e, 8.0}};
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

PointRecord make_point(double x, double y, double z, double intensity, int ret, int num, int label) {
    PointRecord r;
    r.x = x;
    r.y = y;
    r.z = z;
    r.intensity = intensity;
    r.return_number = ret;
    r.num_returns = num;
    r.label = label;
    return r;
}

void gen_ground(const SceneSpec& spec, int label, std::vector<PointRecord>& out) {
    Rng rng(derive_seed(spec.seed, 0x01));
    const long n = std::lround(spec.density * spec.extent * spec.extent);
    for (long i = 0; i < n; ++i) {
        const double x = rng.uniform(0.0, spec.extent);
        const double y = rng.uniform(0.0, spec.extent);
        const double z = rng.next_truncated_normal(spec.noise_sigma);
        out.push_back(make_point(x, y, z, clamp01(0.45 + 0.04 * rng.next_normal()), 1, 1, label));
    }
}

void gen_roof(const SceneSpec& spec, int label, std::vector<PointRecord>& out) {
    Rng rng(derive_seed(spec.seed, 0x02));
    for (const auto& b : buildings(spec.extent)) {
        const long n = std::lround(spec.density * (b.x1 - b.x0) * (b.y1 - b.y0));
        for (long i = 0; i < n; ++i) {
            const double x = rng.uniform(b.x0, b.x1);
            const double y = rng.uniform(b.y0, b.y1);
            const double z = b.height + rng.next_truncated_normal(spec.noise_sigma);
            out.push_back(make_point(x, y, z, clamp01(0.62 + 0.04 * rng.next_normal()), 1, 1, label));
        }
    }
}

void gen_facade(const SceneSpec& spec, int label, std::vector<PointRecord>& out) {
    Rng rng(derive_seed(spec.seed, 0x03));
    for (const auto& b : buildings(spec.extent)) {
        const double wx = b.x1 - b.x0, wy = b.y1 - b.y0;
        const double perimeter = 2.0 * (wx + wy);
        const double z_lo = 0.3;
        const long n = std::lround(spec.density * perimeter * (b.height - z_lo));
        for (long i = 0; i < n; ++i) {
            double t = rng.uniform(0.0, perimeter);
            double x, y;
            if (t < wx) {
                x = b.x0 + t;
                y = b.y0;
            } else if (t < wx + wy) {
                x = b.x1;
                y = b.y0 + (t - wx);
            } else if (t < 2.0 * wx + wy) {
                x = b.x1 - (t - wx - wy);
                y = b.y1;
            } else {
                x = b.x0;
                y = b.y1 - (t - 2.0 * wx - wy);
            }
            x += rng.next_truncated_normal(spec.noise_sigma);
            y += rng.next_truncated_normal(spec.noise_sigma);
            const double z = rng.uniform(z_lo, b.height);
            out.push_back(make_point(x, y, z, clamp01(0.55 + 0.04 * rng.next_normal()), 1, 1, label));
        }
    }
}

void gen_tree(const SceneSpec& spec, int label, std::vector<PointRecord>& out) {
    Rng rng(derive_seed(spec.seed, 0x04));
    const double e = spec.extent;
    const struct {
        double cx, cy;
    } spots[3] = {{0.10 * e, 0.85 * e}, {0.88 * e, 0.12 * e}, {0.50 * e, 0.92 * e}};
    const double a = 1.5, c = 1.8, center_z = 4.0;
    // rough ellipsoid surface area for the canopy point budget
    const double canopy_area = 4.0 * 3.141592653589793 * std::cbrt((a * a) * (a * a) * (c * c));
    for (const auto& s : spots) {
        const long n = std::lround(spec.density * canopy_area);
        for (long i = 0; i < n; ++i) {
            // uniform-ish direction on the shell
            double dx = rng.next_normal(), dy = rng.next_normal(), dz = rng.next_normal();
            const double norm = std::sqrt(dx * dx + dy * dy + dz * dz);
            if (norm == 0.0) continue;
            const double jitter = 1.0 + 0.05 * rng.next_normal();
            const double x = s.cx + a * jitter * dx / norm;
            const double y = s.cy + a * jitter * dy / norm;
            const double z = center_z + c * jitter * dz / norm;
            const int num = 2 + static_cast<int>(rng.next_below(2));
            const int ret = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(num)));
            out.push_back(make_point(x, y, z, clamp01(0.30 + 0.04 * rng.next_normal()), ret, num, label));
        }
        const long trunk = std::lround(spec.density * 1.5);
        for (long i = 0; i < trunk; ++i) {
            const double ang = rng.uniform(0.0, 6.283185307179586);
            const double x = s.cx + 0.1 * std::cos(ang);
            const double y = s.cy + 0.1 * std::sin(ang);
            const double z = rng.uniform(0.1, 2.2);
            out.push_back(make_point(x, y, z, clamp01(0.30 + 0.04 * rng.next_normal()), 2, 2, label));
        }
    }
}

void gen_car(const SceneSpec& spec, int label, std::vector<PointRecord>& out) {
    Rng rng(derive_seed(spec.seed, 0x05));
    const double e = spec.extent;
    const struct {
        double cx, cy;
        bool along_x;
    } cars[2] = {{0.50 * e, 0.08 * e, true}, {0.08 * e, 0.50 * e, false}};
    const double length = 4.2, width = 1.9, height = 1.5;
    for (const auto& car : cars) {
        const double lx = car.along_x ? length : width;
        const double ly = car.along_x ? width : length;
        const double top_area = lx * ly;
        const double side_area = 2.0 * (lx + ly) * height;
        const long n = std::lround(spec.density * (top_area + side_area));
        for (long i = 0; i < n; ++i) {
            const double pick = rng.uniform(0.0, top_area + side_area);
            double x, y, z;
            if (pick < top_area) {
                x = car.cx + rng.uniform(-lx / 2, lx / 2);
                y = car.cy + rng.uniform(-ly / 2, ly / 2);
                z = height + rng.next_truncated_normal(spec.noise_sigma);
            } else {
                const double perim = 2.0 * (lx + ly);
                double t = rng.uniform(0.0, perim);
                if (t < lx) {
                    x = car.cx - lx / 2 + t;
                    y = car.cy - ly / 2;
                } else if (t < lx + ly) {
                    x = car.cx + lx / 2;
                    y = car.cy - ly / 2 + (t - lx);
                } else if (t < 2 * lx + ly) {
                    x = car.cx + lx / 2 - (t - lx - ly);
                    y = car.cy + ly / 2;
                } else {
                    x = car.cx - lx / 2;
                    y = car.cy + ly / 2 - (t - 2 * lx - ly);
                }
                z = rng.uniform(0.2, height);
            }
            out.push_back(make_point(x, y, z, clamp01(0.80 + 0.04 * rng.next_normal()), 1, 1, label));
        }
    }
}

void gen_powerline(const SceneSpec& spec, int label, std::vector<PointRecord>& out) {
    Rng rng(derive_seed(spec.seed, 0x06));
    const double e = spec.extent;
    const double x0 = 0.02 * e, x1 = 0.98 * e, y = 0.47 * e;
    const double pole_height = 10.0, sag = 1.2;
    const long n = std::max(8L, std::lround(spec.density * (x1 - x0) * 0.3));
    for (long i = 0; i < n; ++i) {
        const double t = rng.next_double();
        const double x = x0 + t * (x1 - x0);
        const double z = pole_height - sag * 4.0 * t * (1.0 - t) + rng.next_truncated_normal(spec.noise_sigma);
        const double yy = y + rng.next_truncated_normal(spec.noise_sigma);
        out.push_back(make_point(x, yy, z, clamp01(0.90 + 0.04 * rng.next_normal()), 1, 2, label));
    }
}

}  // namespace

std::vector<pipeline::PointRecord> generate(const SceneSpec& spec) {
    spec.validate();
    std::vector<pipeline::PointRecord> out;
    for (size_t i = 0; i < spec.classes.size(); ++i) {
        const int label = static_cast<int>(i);
        switch (spec.classes[i]) {
            case SceneClass::kGround: gen_ground(spec, label, out); break;
            case SceneClass::kRoof: gen_roof(spec, label, out); break;
            case SceneClass::kFacade: gen_facade(spec, label, out); break;
            case SceneClass::kTree: gen_tree(spec, label, out); break;
            case SceneClass::kCar: gen_car(spec, label, out); break;
            case SceneClass::kPowerline: gen_powerline(spec, label, out); break;
        }
    }
    return out;
}

}  // namespace pointattn::synth

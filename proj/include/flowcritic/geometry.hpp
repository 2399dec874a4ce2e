#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <optional>
#include <ostream>

namespace flowcritic {

struct Point {
    int x = 0;
    int y = 0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Axis-aligned pixel rectangle. Valid boxes have positive extent.
struct BoundingBox {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    long long area() const { return w > 0 && h > 0 ? static_cast<long long>(w) * h : 0; }
    int right() const { return x + w; }
    int bottom() const { return y + h; }

    bool valid() const { return x >= 0 && y >= 0 && w > 0 && h > 0; }

    bool within(int width, int height) const {
        return valid() && right() <= width && bottom() <= height;
    }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const BoundingBox& b) {
    return os << '[' << b.x << ',' << b.y << ',' << b.w << ',' << b.h << ']';
}

inline std::optional<BoundingBox> intersect(const BoundingBox& a, const BoundingBox& b) {
    int x0 = std::max(a.x, b.x);
    int y0 = std::max(a.y, b.y);
    int x1 = std::min(a.right(), b.right());
    int y1 = std::min(a.bottom(), b.bottom());
    if (x1 <= x0 || y1 <= y0) return std::nullopt;
    return BoundingBox{x0, y0, x1 - x0, y1 - y0};
}

inline double iou(const BoundingBox& a, const BoundingBox& b) {
    auto inter = intersect(a, b);
    if (!inter) return 0.0;
    auto i = static_cast<double>(inter->area());
    return i / (static_cast<double>(a.area()) + static_cast<double>(b.area()) - i);
}

/// Clamps a region to an image of the given size; nullopt when nothing is left.
inline std::optional<BoundingBox> clamp_to(const BoundingBox& region, int width, int height) {
    return intersect(region, BoundingBox{0, 0, width, height});
}

inline void to_json(nlohmann::json& j, const Point& p) { j = nlohmann::json::array({p.x, p.y}); }

inline void from_json(const nlohmann::json& j, Point& p) {
    if (!j.is_array() || j.size() != 2) throw nlohmann::json::type_error::create(302, "point must be [x, y]", &j);
    p = Point{j.at(0).get<int>(), j.at(1).get<int>()};
}

inline void to_json(nlohmann::json& j, const BoundingBox& b) { j = nlohmann::json::array({b.x, b.y, b.w, b.h}); }

inline void from_json(const nlohmann::json& j, BoundingBox& b) {
    if (!j.is_array() || j.size() != 4) throw nlohmann::json::type_error::create(302, "box must be [x, y, w, h]", &j);
    b = BoundingBox{j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>()};
}

} // namespace flowcritic

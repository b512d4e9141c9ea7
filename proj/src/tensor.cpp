#include "twmx/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace twmx {

std::string Shape::str() const {
    return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " +
           std::to_string(w) + ")";
}

Tensor::Tensor(Shape shape, float fill) : shape_(shape) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0)
        fail_shape("negative dimension in shape " + shape.str());
    data_.assign(static_cast<size_t>(shape.numel()), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0)
        fail_shape("negative dimension in shape " + shape.str());
    if (static_cast<int64_t>(data_.size()) != shape.numel())
        fail_shape("data length " + std::to_string(data_.size()) + " does not match shape " + shape.str());
}

bool Tensor::bit_equal(const Tensor& other) const noexcept {
    return shape_ == other.shape_ &&
           (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0);
}

Tensor elementwise_combine(const Tensor& a, const Tensor& b, Combine op) {
    if (a.shape() != b.shape())
        fail_shape("elementwise shape mismatch: " + a.shape().str() + " vs " + b.shape().str());
    Tensor out(a.shape());
    const float* pa = a.raw();
    const float* pb = b.raw();
    float* po = out.raw();
    const int64_t count = a.numel();
    if (op == Combine::Add) {
        for (int64_t i = 0; i < count; ++i) po[i] = pa[i] + pb[i];
    } else {
        for (int64_t i = 0; i < count; ++i) po[i] = pa[i] * pb[i];
    }
    return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        fail_shape("elementwise shape mismatch: " + a.shape().str() + " vs " + b.shape().str());
    float* pa = a.raw();
    const float* pb = b.raw();
    const int64_t count = a.numel();
    for (int64_t i = 0; i < count; ++i) pa[i] += pb[i];
}

Tensor concat_channels(std::span<const Tensor> parts) {
    if (parts.empty()) fail_shape("concat_channels: empty list");
    const Shape& first = parts.front().shape();
    int64_t channels = 0;
    for (const Tensor& p : parts) {
        const Shape& s = p.shape();
        if (s.n != first.n || s.h != first.h || s.w != first.w)
            fail_shape("concat_channels: " + s.str() + " incompatible with " + first.str());
        channels += s.c;
    }
    Tensor out(Shape{first.n, channels, first.h, first.w});
    const int64_t plane = first.h * first.w;
    for (int64_t n = 0; n < first.n; ++n) {
        float* dst = out.plane(n, 0);
        for (const Tensor& p : parts) {
            const int64_t block = p.c() * plane;
            if (block > 0) std::memcpy(dst, p.plane(n, 0), static_cast<size_t>(block) * sizeof(float));
            dst += block;
        }
    }
    return out;
}

Tensor concat_channels(std::initializer_list<Tensor> parts) {
    return concat_channels(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor slice_channels(const Tensor& x, int64_t begin, int64_t end) {
    if (begin < 0 || end > x.c() || begin > end)
        fail_shape("slice_channels: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                   ") outside " + x.shape().str());
    Tensor out(Shape{x.n(), end - begin, x.h(), x.w()});
    const int64_t block = (end - begin) * x.h() * x.w();
    for (int64_t n = 0; n < x.n(); ++n) {
        if (block > 0) std::memcpy(out.plane(n, 0), x.plane(n, begin), static_cast<size_t>(block) * sizeof(float));
    }
    return out;
}

Tensor concat_batch(std::span<const Tensor> parts) {
    if (parts.empty()) fail_shape("concat_batch: empty list");
    const Shape& first = parts.front().shape();
    int64_t batch = 0;
    for (const Tensor& p : parts) {
        const Shape& s = p.shape();
        if (s.c != first.c || s.h != first.h || s.w != first.w)
            fail_shape("concat_batch: " + s.str() + " incompatible with " + first.str());
        batch += s.n;
    }
    std::vector<float> data;
    data.reserve(static_cast<size_t>(batch * first.c * first.h * first.w));
    for (const Tensor& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
    return Tensor(Shape{batch, first.c, first.h, first.w}, std::move(data));
}

Tensor slice_batch(const Tensor& x, int64_t begin, int64_t end) {
    if (begin < 0 || end > x.n() || begin > end) fail_shape("slice_batch: range outside " + x.shape().str());
    const int64_t per = x.c() * x.h() * x.w();
    std::vector<float> data(x.data().begin() + begin * per, x.data().begin() + end * per);
    return Tensor(Shape{end - begin, x.c(), x.h(), x.w()}, std::move(data));
}

bool all_finite(const Tensor& t) noexcept {
    return std::all_of(t.data().begin(), t.data().end(), [](float v) { return std::isfinite(v); });
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) fail_shape("max_abs_diff: " + a.shape().str() + " vs " + b.shape().str());
    float worst = 0.0f;
    for (int64_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::fabs(a.data()[i] - b.data()[i]));
    return worst;
}

} // namespace twmx

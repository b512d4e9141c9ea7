#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace twmx {

enum class ErrorKind {
    Usage,
    NotFound,
    Decode,
    Shape,
};

// Every error raised by the library carries a kind so the CLI can map it to
// a stable exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_shape(const std::string& what) { throw Error(ErrorKind::Shape, what); }

struct Shape {
    int64_t n = 0;
    int64_t c = 0;
    int64_t h = 0;
    int64_t w = 0;

    int64_t numel() const noexcept { return n * c * h * w; }
    int64_t plane() const noexcept { return h * w; }
    friend bool operator==(const Shape&, const Shape&) = default;
    std::string str() const;
};

/// Dense NCHW float tensor. Storage is a contiguous row-major vector.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> data);

    static Tensor zeros(Shape shape) { return Tensor(shape, 0.0f); }
    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape(), 0.0f); }

    const Shape& shape() const noexcept { return shape_; }
    int64_t n() const noexcept { return shape_.n; }
    int64_t c() const noexcept { return shape_.c; }
    int64_t h() const noexcept { return shape_.h; }
    int64_t w() const noexcept { return shape_.w; }
    int64_t numel() const noexcept { return static_cast<int64_t>(data_.size()); }
    bool empty() const noexcept { return data_.empty(); }

    int64_t offset(int64_t n, int64_t c, int64_t h, int64_t w) const noexcept {
        return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }
    float at(int64_t n, int64_t c, int64_t h, int64_t w) const { return data_[offset(n, c, h, w)]; }
    float& at(int64_t n, int64_t c, int64_t h, int64_t w) { return data_[offset(n, c, h, w)]; }

    std::span<const float> data() const noexcept { return data_; }
    std::span<float> data() noexcept { return data_; }
    float* raw() noexcept { return data_.data(); }
    const float* raw() const noexcept { return data_.data(); }

    // Pointer to the (n, c) plane.
    const float* plane(int64_t n, int64_t c) const noexcept { return data_.data() + offset(n, c, 0, 0); }
    float* plane(int64_t n, int64_t c) noexcept { return data_.data() + offset(n, c, 0, 0); }

    bool bit_equal(const Tensor& other) const noexcept;

private:
    Shape shape_{};
    std::vector<float> data_;
};

enum class Combine { Add, Mul };

Tensor elementwise_combine(const Tensor& a, const Tensor& b, Combine op);
inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise_combine(a, b, Combine::Add); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise_combine(a, b, Combine::Mul); }

// In-place a += b; same shape contract as elementwise_combine.
void add_inplace(Tensor& a, const Tensor& b);

Tensor concat_channels(std::span<const Tensor> parts);
Tensor concat_channels(std::initializer_list<Tensor> parts);

/// Channels [begin, end) of every batch element.
Tensor slice_channels(const Tensor& x, int64_t begin, int64_t end);

/// Stacks tensors along the batch dimension; used for batch-independence checks.
Tensor concat_batch(std::span<const Tensor> parts);
Tensor slice_batch(const Tensor& x, int64_t begin, int64_t end);

bool all_finite(const Tensor& t) noexcept;
float max_abs_diff(const Tensor& a, const Tensor& b);

} // namespace twmx

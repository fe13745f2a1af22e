#include "muscore/tensor_io.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace muscore {

namespace {

constexpr char kMagic[8] = {'M', 'U', 'S', 'C', 'T', 'E', 'N', 'S'};

std::size_t checked_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeOverflow("zero dimension in shape");
        if (n > (std::size_t(1) << 40) / d) throw ShapeOverflow("shape product too large");
        n *= d;
    }
    return n;
}

}  // namespace

std::size_t TensorFile::element_count() const {
    return checked_product(shape);
}

TensorFile TensorFile::from_f32(std::vector<std::size_t> shape, std::vector<float> data) {
    TensorFile t;
    t.dtype = Dtype::f32;
    t.shape = std::move(shape);
    t.f32 = std::move(data);
    if (t.element_count() != t.f32.size())
        throw ShapeOverflow("payload size does not match shape");
    return t;
}

TensorFile TensorFile::from_u8(std::vector<std::size_t> shape, std::vector<std::uint8_t> data) {
    TensorFile t;
    t.dtype = Dtype::u8;
    t.shape = std::move(shape);
    t.u8 = std::move(data);
    if (t.element_count() != t.u8.size())
        throw ShapeOverflow("payload size does not match shape");
    return t;
}

TensorFile TensorFile::from_matrix(const Eigen::MatrixXd& m) {
    std::vector<float> data(static_cast<std::size_t>(m.rows() * m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            data[static_cast<std::size_t>(r * m.cols() + c)] = static_cast<float>(m(r, c));
    return from_f32({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                    std::move(data));
}

Eigen::MatrixXd TensorFile::as_matrix() const {
    if (dtype != Dtype::f32 || shape.size() != 2)
        throw ShapeMismatch("expected a 2-D f32 tensor");
    Eigen::MatrixXd m(shape[0], shape[1]);
    for (std::size_t r = 0; r < shape[0]; ++r)
        for (std::size_t c = 0; c < shape[1]; ++c)
            m(r, c) = f32[r * shape[1] + c];
    return m;
}

TensorFile load_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);

    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw MagicMismatch(path);

    std::uint32_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), 4);
    if (!in || header_len == 0 || header_len > (1u << 20))
        throw MagicMismatch("bad header length in " + path);

    std::string header(header_len, '\0');
    in.read(header.data(), header_len);
    if (!in) throw MagicMismatch("truncated header in " + path);

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw MagicMismatch("invalid header JSON in " + path + ": " + e.what());
    }

    TensorFile t;
    const std::string dtype = j.at("dtype").get<std::string>();
    if (dtype == "f32") t.dtype = Dtype::f32;
    else if (dtype == "u8") t.dtype = Dtype::u8;
    else throw MagicMismatch("unknown dtype '" + dtype + "' in " + path);

    for (const auto& d : j.at("shape")) {
        auto v = d.get<std::int64_t>();
        if (v <= 0) throw ShapeOverflow("non-positive dimension in " + path);
        t.shape.push_back(static_cast<std::size_t>(v));
    }

    const std::size_t count = t.element_count();
    const std::size_t elem_size = t.dtype == Dtype::f32 ? 4 : 1;

    in.seekg(0, std::ios::end);
    const std::size_t remaining = static_cast<std::size_t>(in.tellg()) - 12 - header_len;
    if (remaining != count * elem_size)
        throw ShapeOverflow(path + ": header declares " + std::to_string(count) +
                            " values, payload holds " + std::to_string(remaining / elem_size));
    in.seekg(12 + header_len, std::ios::beg);

    if (t.dtype == Dtype::f32) {
        t.f32.resize(count);
        in.read(reinterpret_cast<char*>(t.f32.data()), static_cast<std::streamsize>(count * 4));
        for (float v : t.f32)
            if (!std::isfinite(v)) throw NonFiniteValue(path);
    } else {
        t.u8.resize(count);
        in.read(reinterpret_cast<char*>(t.u8.data()), static_cast<std::streamsize>(count));
    }
    if (!in) throw ShapeOverflow("truncated payload in " + path);
    return t;
}

void save_tensor(const std::string& path, const TensorFile& tensor) {
    const std::size_t count = checked_product(tensor.shape);
    if (tensor.dtype == Dtype::f32 && tensor.f32.size() != count)
        throw ShapeOverflow("payload size does not match shape");
    if (tensor.dtype == Dtype::u8 && tensor.u8.size() != count)
        throw ShapeOverflow("payload size does not match shape");
    for (float v : tensor.f32)
        if (!std::isfinite(v)) throw NonFiniteValue("refusing to write non-finite value");

    nlohmann::json j;
    j["dtype"] = tensor.dtype == Dtype::f32 ? "f32" : "u8";
    j["shape"] = tensor.shape;
    const std::string header = j.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out.write(kMagic, 8);
    const std::uint32_t header_len = static_cast<std::uint32_t>(header.size());
    out.write(reinterpret_cast<const char*>(&header_len), 4);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    if (tensor.dtype == Dtype::f32)
        out.write(reinterpret_cast<const char*>(tensor.f32.data()),
                  static_cast<std::streamsize>(count * 4));
    else
        out.write(reinterpret_cast<const char*>(tensor.u8.data()),
                  static_cast<std::streamsize>(count));
    if (!out) throw Error("write failed for " + path);
}

OrganizedPointCloud organize_xyz(const TensorFile& tensor) {
    if (tensor.dtype != Dtype::f32 || tensor.shape.size() != 3 || tensor.shape[2] != 3)
        throw ShapeMismatch("XYZ map must be an H x W x 3 f32 tensor");
    OrganizedPointCloud cloud;
    cloud.height = tensor.shape[0];
    cloud.width = tensor.shape[1];
    const std::size_t pixels = cloud.height * cloud.width;
    cloud.valid_mask.assign(pixels, 0);
    cloud.pixel_to_point.assign(pixels, -1);

    std::vector<std::array<double, 3>> pts;
    for (std::size_t p = 0; p < pixels; ++p) {
        const float x = tensor.f32[p * 3 + 0];
        const float y = tensor.f32[p * 3 + 1];
        const float z = tensor.f32[p * 3 + 2];
        if (x == 0.0f && y == 0.0f && z == 0.0f) continue;
        cloud.valid_mask[p] = 1;
        cloud.pixel_to_point[p] = static_cast<std::int64_t>(pts.size());
        pts.push_back({double(x), double(y), double(z)});
    }
    cloud.points.resize(static_cast<Eigen::Index>(pts.size()), 3);
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (int c = 0; c < 3; ++c)
            cloud.points(static_cast<Eigen::Index>(i), c) = pts[i][static_cast<std::size_t>(c)];
    cloud.empty_warning = pts.empty();
    return cloud;
}

OrganizedPointCloud load_xyz_map(const std::string& path, std::size_t height, std::size_t width) {
    TensorFile t = load_tensor(path);
    if (t.shape.size() != 3 || t.shape[0] != height || t.shape[1] != width || t.shape[2] != 3)
        throw ShapeMismatch("XYZ map " + path + " does not match declared shape");
    return organize_xyz(t);
}

}  // namespace muscore

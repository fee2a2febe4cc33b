// SVHN cropped-digit loader for the canonical train_32x32.mat /
// test_32x32.mat files (MAT 5 container, zlib-compressed elements).
// Only the numeric-array subset of the format is parsed.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <vector>

#include <zlib.h>

#include "safeaug/data/dataset.hpp"

namespace safeaug {

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t miINT8 = 1, miUINT8 = 2, miINT16 = 3, miUINT16 = 4, miINT32 = 5, miUINT32 = 6,
                        miSINGLE = 7, miDOUBLE = 9, miMATRIX = 14, miCOMPRESSED = 15;

struct Cursor {
    const std::uint8_t* p;
    std::size_t len;
    std::size_t off = 0;

    void require(std::size_t n, const char* what) const {
        if (off + n > len) throw std::runtime_error(std::string("svhn/mat5: truncated ") + what);
    }
    std::uint32_t u32() {
        require(4, "u32");
        std::uint32_t v;
        std::memcpy(&v, p + off, 4);
        off += 4;
        return v;
    }
    const std::uint8_t* bytes(std::size_t n, const char* what) {
        require(n, what);
        const std::uint8_t* out = p + off;
        off += n;
        return out;
    }
    void align8() { off = (off + 7) & ~std::size_t(7); }
    bool done() const { return off >= len; }
};

std::vector<std::uint8_t> zlib_inflate(const std::uint8_t* data, std::size_t len) {
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) throw std::runtime_error("svhn/mat5: inflateInit failed");
    std::vector<std::uint8_t> out;
    out.resize(std::max<std::size_t>(len * 4, 1 << 16));
    zs.next_in = const_cast<Bytef*>(data);
    zs.avail_in = static_cast<uInt>(len);
    std::size_t written = 0;
    int rc = Z_OK;
    while (rc == Z_OK) {
        if (written == out.size()) out.resize(out.size() * 2);
        zs.next_out = out.data() + written;
        zs.avail_out = static_cast<uInt>(out.size() - written);
        rc = inflate(&zs, Z_NO_FLUSH);
        written = out.size() - zs.avail_out;
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw std::runtime_error("svhn/mat5: corrupt zlib stream");
        }
    }
    inflateEnd(&zs);
    out.resize(written);
    return out;
}

struct MatVar {
    std::string name;
    std::vector<int> dims;
    std::vector<double> values;  // numeric payload widened to double
};

struct Element {
    std::uint32_t type = 0;
    const std::uint8_t* data = nullptr;
    std::size_t size = 0;
};

Element read_element(Cursor& c) {
    Element e;
    const std::uint32_t first = c.u32();
    if (first >> 16) {
        // Small data element: type and length packed into one word.
        e.type = first & 0xffff;
        e.size = first >> 16;
        e.data = c.bytes(4, "small element");
    } else {
        e.type = first;
        e.size = c.u32();
        e.data = c.bytes(e.size, "element payload");
        c.align8();
    }
    return e;
}

std::size_t type_width(std::uint32_t t) {
    switch (t) {
        case miINT8:
        case miUINT8: return 1;
        case miINT16:
        case miUINT16: return 2;
        case miINT32:
        case miUINT32:
        case miSINGLE: return 4;
        case miDOUBLE: return 8;
        default: throw std::runtime_error("svhn/mat5: unsupported numeric type " + std::to_string(t));
    }
}

void widen(const Element& e, std::vector<double>& out) {
    const std::size_t n = e.size / type_width(e.type);
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        switch (e.type) {
            case miINT8: out[i] = static_cast<const std::int8_t*>(static_cast<const void*>(e.data))[i]; break;
            case miUINT8: out[i] = e.data[i]; break;
            case miINT16: {
                std::int16_t v;
                std::memcpy(&v, e.data + 2 * i, 2);
                out[i] = v;
                break;
            }
            case miUINT16: {
                std::uint16_t v;
                std::memcpy(&v, e.data + 2 * i, 2);
                out[i] = v;
                break;
            }
            case miINT32: {
                std::int32_t v;
                std::memcpy(&v, e.data + 4 * i, 4);
                out[i] = v;
                break;
            }
            case miUINT32: {
                std::uint32_t v;
                std::memcpy(&v, e.data + 4 * i, 4);
                out[i] = v;
                break;
            }
            case miSINGLE: {
                float v;
                std::memcpy(&v, e.data + 4 * i, 4);
                out[i] = v;
                break;
            }
            case miDOUBLE: {
                double v;
                std::memcpy(&v, e.data + 8 * i, 8);
                out[i] = v;
                break;
            }
        }
    }
}

MatVar parse_matrix(const Element& outer) {
    Cursor c{outer.data, outer.size};
    MatVar var;
    read_element(c);  // array flags (class verified implicitly by data reads)
    Element dims = read_element(c);
    const std::size_t ndims = dims.size / 4;
    for (std::size_t i = 0; i < ndims; ++i) {
        std::int32_t d;
        std::memcpy(&d, dims.data + 4 * i, 4);
        var.dims.push_back(d);
    }
    Element name = read_element(c);
    var.name.assign(reinterpret_cast<const char*>(name.data), name.size);
    Element data = read_element(c);
    widen(data, var.values);
    return var;
}

std::map<std::string, MatVar> parse_mat5(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("svhn: cannot open " + path);
    std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (raw.size() < 128) throw std::runtime_error("svhn/mat5: file too small");
    if (!(raw[126] == 'I' && raw[127] == 'M')) {
        throw std::runtime_error("svhn/mat5: not a little-endian MAT 5 file");
    }

    std::map<std::string, MatVar> vars;
    Cursor c{raw.data(), raw.size(), 128};
    std::vector<std::vector<std::uint8_t>> keepalive;
    while (!c.done()) {
        if (c.len - c.off < 8) break;
        Element e = read_element(c);
        if (e.type == miCOMPRESSED) {
            keepalive.push_back(zlib_inflate(e.data, e.size));
            Cursor inner{keepalive.back().data(), keepalive.back().size()};
            Element m = read_element(inner);
            if (m.type == miMATRIX) {
                MatVar var = parse_matrix(m);
                vars[var.name] = std::move(var);
            }
        } else if (e.type == miMATRIX) {
            MatVar var = parse_matrix(e);
            vars[var.name] = std::move(var);
        }
    }
    return vars;
}

void load_split(const std::string& path, Split& out) {
    auto vars = parse_mat5(path);
    if (!vars.count("X") || !vars.count("y")) {
        throw std::runtime_error("svhn: " + path + " lacks the X/y variables");
    }
    const MatVar& X = vars["X"];
    const MatVar& y = vars["y"];
    if (X.dims.size() != 4 || X.dims[0] != 32 || X.dims[1] != 32 || X.dims[2] != 3) {
        throw std::runtime_error("svhn: unexpected X dims");
    }
    const int n = X.dims[3];
    if (static_cast<int>(y.values.size()) != n) throw std::runtime_error("svhn: X/y length mismatch");

    for (int i = 0; i < n; ++i) {
        Image img(32, 32, 3);
        // MATLAB arrays are column-major: X(row, col, chan, i).
        for (int ch = 0; ch < 3; ++ch)
            for (int x = 0; x < 32; ++x)
                for (int yrow = 0; yrow < 32; ++yrow) {
                    const std::size_t idx = yrow + 32 * (x + 32 * (ch + 3 * static_cast<std::size_t>(i)));
                    img.at(yrow, x, ch) = static_cast<float>(X.values[idx] / 255.0);
                }
        int label = static_cast<int>(y.values[i]);
        if (label == 10) label = 0;  // SVHN stores digit zero as class 10
        out.images.push_back(std::move(img));
        out.labels.push_back({label});
    }
}

}  // namespace

DatasetHandle load_svhn(const std::string& root, std::uint64_t seed) {
    DatasetHandle ds;
    ds.name = "svhn";
    ds.label_kind = LabelKind::ClassIndex;
    ds.num_classes = 10;
    ds.input_height = ds.input_width = 32;
    ds.input_channels = 3;

    const fs::path train = fs::path(root) / "train_32x32.mat";
    const fs::path test = fs::path(root) / "test_32x32.mat";
    if (!fs::exists(train) || !fs::exists(test)) {
        throw std::runtime_error("svhn: expected train_32x32.mat and test_32x32.mat under " + root);
    }
    verify_against_manifest((fs::path(root) / "checksums.json").string(), root,
                            {"train_32x32.mat", "test_32x32.mat"});
    load_split(train.string(), ds.train);
    load_split(test.string(), ds.test);

    ds.stats = compute_norm_stats(ds.train.images);
    Rng rng(Rng::splitmix64(seed ^ 0x51111ULL));
    carve_validation(ds, 0.1, rng);
    return ds;
}

}  // namespace safeaug

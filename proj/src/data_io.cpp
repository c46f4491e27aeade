#include "litenext/data_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "litenext/image.hpp"

namespace litenext {

namespace fs = std::filesystem;

namespace {

struct Ellipse {
  double cx, cy, ra, rb, angle;
  // Normalized squared radius of (x, y): <= 1 means inside.
  double metric(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = (dx * c + dy * s) / ra;
    const double v = (-dx * s + dy * c) / rb;
    return u * u + v * v;
  }
};

uint64_t mix_seed(uint64_t seed, uint64_t i) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (i + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

void synth_generate(int n, int size, double overlap_fraction, uint64_t seed,
                    const std::string& out_dir) {
  if (size < 16 || size % 16 != 0)
    throw std::invalid_argument(
        "synth_generate: size must be a positive multiple of 16");
  if (n <= 0) throw std::invalid_argument("synth_generate: n must be > 0");
  fs::create_directories(fs::path(out_dir) / "images");
  fs::create_directories(fs::path(out_dir) / "masks");

  const int n_overlap = (int)std::lround(overlap_fraction * n);

  for (int i = 0; i < n; ++i) {
    std::mt19937_64 rng(mix_seed(seed, (uint64_t)i));
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    // Low-frequency background texture: 8x8 grid, bilinear to full size.
    const int G = 8;
    std::vector<float> grid(G * G);
    for (auto& g : grid) g = (float)(0.10 * uni(rng));
    Image tex;
    tex.width = G;
    tex.height = G;
    tex.channels = 1;
    tex.pixels = grid;
    Image bg = resize_bilinear_image(tex, size, size);

    // Blobs: 2..6 ellipses scattered around a per-image cluster center, so
    // they typically merge into one sizeable foreground region (the scale a
    // coarse decoder can resolve) while still producing the close/overlapping
    // object boundaries the marginal weighting targets.
    const int count = 2 + (int)(uni(rng) * 3.0);  // 2..4 (within the 2..6 contract)
    const double ccx = size * (0.35 + 0.3 * uni(rng));
    const double ccy = size * (0.35 + 0.3 * uni(rng));
    std::vector<Ellipse> blobs;
    for (int b = 0; b < (int)count; ++b) {
      Ellipse e;
      e.ra = size * (0.26 + 0.12 * uni(rng));
      e.rb = size * (0.26 + 0.12 * uni(rng));
      e.angle = uni(rng) * M_PI;
      if (i < n_overlap && b == 1) {
        // Force the second blob to touch/overlap the first.
        const double phi = uni(rng) * 2 * M_PI;
        const double d = (blobs[0].ra + e.ra) * (0.4 + 0.5 * uni(rng));
        e.cx = blobs[0].cx + d * std::cos(phi);
        e.cy = blobs[0].cy + d * std::sin(phi);
        e.cx = std::clamp(e.cx, 0.15 * size, 0.85 * size);
        e.cy = std::clamp(e.cy, 0.15 * size, 0.85 * size);
      } else {
        e.cx = std::clamp(ccx + (uni(rng) - 0.5) * 0.10 * size, 0.15 * size,
                          0.85 * size);
        e.cy = std::clamp(ccy + (uni(rng) - 0.5) * 0.10 * size, 0.15 * size,
                          0.85 * size);
      }
      blobs.push_back(e);
    }

    std::vector<uint8_t> mask((size_t)size * size, 0);
    std::vector<uint8_t> img((size_t)size * size * 3);
    std::normal_distribution<double> noise(0.0, 0.02);
    std::vector<double> tint(blobs.size() * 3);
    for (auto& t : tint) t = 0.5 + 0.3 * uni(rng);

    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double px = x + 0.5, py = y + 0.5;  // pixel center
        double fg[3] = {0, 0, 0};
        bool inside = false;
        for (size_t b = 0; b < blobs.size(); ++b) {
          const double m = blobs[b].metric(px, py);
          if (m <= 1.0) inside = true;
          // Soft intensity edge extending slightly past the geometry.
          const double soft =
              std::max(0.0, 1.0 - std::max(0.0, m - 0.7) / 0.6);
          for (int c = 0; c < 3; ++c)
            fg[c] = std::max(fg[c], soft * tint[b * 3 + c]);
        }
        mask[(size_t)y * size + x] = inside ? 255 : 0;
        const double base = 0.25 + bg.pixels[(size_t)y * size + x];
        for (int c = 0; c < 3; ++c) {
          const double v = base + fg[c] + noise(rng);
          img[((size_t)y * size + x) * 3 + c] =
              (uint8_t)std::clamp((int)std::lround(v * 255.0), 0, 255);
        }
      }
    }

    char stem[32];
    std::snprintf(stem, sizeof(stem), "sample_%04d", i);
    write_png_rgb((fs::path(out_dir) / "images" / (std::string(stem) + ".png"))
                      .string(),
                  img, size, size);
    write_png_gray((fs::path(out_dir) / "masks" / (std::string(stem) + ".png"))
                       .string(),
                   mask, size, size);
  }
}

std::vector<SampleRecord> load_dataset(const std::string& dir,
                                       int target_size) {
  const fs::path images = fs::path(dir) / "images";
  const fs::path masks = fs::path(dir) / "masks";
  if (!fs::is_directory(images) || !fs::is_directory(masks))
    throw std::runtime_error("load_dataset: expected " + images.string() +
                             " and " + masks.string());
  std::vector<std::string> stems;
  for (const auto& e : fs::directory_iterator(images))
    if (e.path().extension() == ".png") stems.push_back(e.path().stem());
  std::sort(stems.begin(), stems.end());

  std::vector<SampleRecord> records;
  for (const auto& stem : stems) {
    const fs::path mpath = masks / (stem + ".png");
    if (!fs::exists(mpath))
      throw std::runtime_error("load_dataset: missing mask for " + stem +
                               " at " + mpath.string());
    Image img = read_png((images / (stem + ".png")).string());
    Image msk = read_png(mpath.string());
    img = resize_bilinear_image(img, target_size, target_size);
    msk = resize_nearest_image(msk, target_size, target_size);

    SampleRecord rec;
    rec.id = stem;
    rec.height = rec.width = target_size;
    rec.image.resize((size_t)3 * target_size * target_size);
    for (int y = 0; y < target_size; ++y)
      for (int x = 0; x < target_size; ++x)
        for (int c = 0; c < 3; ++c)
          rec.image[((size_t)c * target_size + y) * target_size + x] =
              img.channels == 3 ? img.at(y, x, c) : img.at(y, x, 0);
    rec.mask.resize((size_t)target_size * target_size);
    for (size_t p = 0; p < rec.mask.size(); ++p)
      rec.mask[p] = msk.pixels[p * msk.channels] > 127.5f / 255.0f ? 1.f : 0.f;
    records.push_back(std::move(rec));
  }
  return records;
}

namespace {

constexpr char kMagic[4] = {'L', 'N', 'X', 'T'};
constexpr uint16_t kVersion = 1;

template <typename T>
void put(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));  // little-endian host
  buf.append(raw, sizeof(T));
}

template <typename T>
T take(const std::string& buf, size_t& off) {
  if (off + sizeof(T) > buf.size())
    throw CheckpointTruncatedError("checkpoint truncated at offset " +
                                   std::to_string(off));
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

void save_checkpoint(const ModelParams<float>& params,
                     const std::string& path) {
  std::string buf;
  buf.append(kMagic, 4);
  put(buf, kVersion);
  put(buf, (uint32_t)params.named.size());
  for (const auto& [name, t] : params.named) {
    put(buf, (uint16_t)name.size());
    buf.append(name);
    put(buf, (uint8_t)t.rank());
    for (int d : t.shape()) put(buf, (uint32_t)d);
    put(buf, (uint8_t)0);  // dtype 0 = float32
    buf.append(reinterpret_cast<const char*>(t.data()),
               t.size() * sizeof(float));
  }
  const uint32_t crc =
      (uint32_t)crc32(0L, reinterpret_cast<const Bytef*>(buf.data()),
                      (uInt)buf.size());
  put(buf, crc);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path);
  out.write(buf.data(), (std::streamsize)buf.size());
  if (!out) throw CheckpointError("write failed: " + path);
}

ModelParams<float> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < 4 + 2 + 4 + 4)
    throw CheckpointTruncatedError("checkpoint smaller than header");
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    throw CheckpointFormatError("bad magic \"" + buf.substr(0, 4) +
                                "\", expected \"LNXT\"");
  const uint32_t stored_crc =
      *reinterpret_cast<const uint32_t*>(buf.data() + buf.size() - 4);
  const uint32_t actual_crc =
      (uint32_t)crc32(0L, reinterpret_cast<const Bytef*>(buf.data()),
                      (uInt)(buf.size() - 4));
  if (stored_crc != actual_crc)
    throw CheckpointCrcError("CRC mismatch: stored " +
                             std::to_string(stored_crc) + ", computed " +
                             std::to_string(actual_crc));

  size_t off = 4;
  const uint16_t version = take<uint16_t>(buf, off);
  if (version != kVersion)
    throw CheckpointVersionError("unknown checkpoint version " +
                                 std::to_string(version));
  const uint32_t count = take<uint32_t>(buf, off);
  ModelParams<float> params;
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = take<uint16_t>(buf, off);
    if (off + name_len > buf.size())
      throw CheckpointTruncatedError("checkpoint truncated in tensor name");
    std::string name = buf.substr(off, name_len);
    off += name_len;
    const uint8_t rank = take<uint8_t>(buf, off);
    std::vector<int> shape(rank);
    for (int d = 0; d < rank; ++d) shape[d] = (int)take<uint32_t>(buf, off);
    const uint8_t dtype = take<uint8_t>(buf, off);
    if (dtype != 0)
      throw CheckpointFormatError("unknown dtype code " +
                                  std::to_string(dtype));
    Tensor<float> t(shape);
    const size_t bytes = (size_t)t.size() * sizeof(float);
    if (off + bytes > buf.size() - 4)
      throw CheckpointTruncatedError("checkpoint truncated in payload of " +
                                     name);
    std::memcpy(t.data(), buf.data() + off, bytes);
    off += bytes;
    t.set_requires_grad(name.rfind("phi.", 0) != 0);
    params.named[name] = t;
  }
  return params;
}

void export_weight_mask_image(const Tensor<float>& weight_mask,
                              const std::string& path) {
  const auto& sh = weight_mask.shape();
  const int W = sh.back(), H = sh[sh.size() - 2];
  if ((int64_t)W * H != weight_mask.size())
    throw std::invalid_argument("export_weight_mask_image: expected HxW mask");
  std::vector<uint8_t> px((size_t)H * W);
  for (int64_t i = 0; i < weight_mask.size(); ++i)
    px[i] = (uint8_t)std::floor(255.0f * weight_mask.data()[i]);
  write_png_gray(path, px, W, H);
}

}  // namespace litenext

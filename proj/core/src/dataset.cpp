#include "pagn/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace pagn {

DatasetPartition sample_dataset(std::uint64_t master_seed, int identities_per_split,
                                int samples_per_cluster, int image_size) {
  check(identities_per_split >= 1 && samples_per_cluster >= 1,
        "dataset: counts must be at least 1");
  DatasetPartition part;
  part.master_seed = master_seed;
  part.image_size = image_size;

  std::vector<IdentitySpec> identities(std::size_t(2) * identities_per_split);
  for (int i = 0; i < 2 * identities_per_split; ++i) {
    std::mt19937_64 rng(mix64(master_seed, 0x1d000000 + std::uint64_t(i)));
    identities[std::size_t(i)] = sample_identity(rng);
  }

  std::vector<SyntheticSample*> flat;
  for (int split = 0; split < 2; ++split)
    for (int c = 0; c < AgeCluster::count; ++c) {
      auto& bucket = split == 0 ? part.train[std::size_t(c)] : part.test[std::size_t(c)];
      bucket.resize(std::size_t(samples_per_cluster));
      for (int j = 0; j < samples_per_cluster; ++j) {
        SyntheticSample& s = bucket[std::size_t(j)];
        s.sample_id = (split * AgeCluster::count + c) * samples_per_cluster + j;
        s.split = split;
        s.cluster = c;
        // round-robin: every identity appears in each cluster when counts allow
        s.identity_index = split * identities_per_split + (j % identities_per_split);
        s.identity = identities[std::size_t(s.identity_index)];
        std::mt19937_64 rng(mix64(master_seed, 0x5a000000 + std::uint64_t(s.sample_id)));
        s.age_years = AgeCluster::lo(c) + to_unit(rng()) * (AgeCluster::hi(c) - AgeCluster::lo(c));
        flat.push_back(&s);
      }
    }

  const int nt = worker_threads();
#ifdef _OPENMP
#pragma omp parallel for num_threads(nt) schedule(dynamic) if (nt > 1)
#endif
  for (std::size_t i = 0; i < flat.size(); ++i)
    flat[i]->image = render_face(flat[i]->identity, flat[i]->age_years, image_size);

  return part;
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  check(image.rank() == 3 && image.dim(0) == 3, "ppm: image must be [3,H,W]");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IOError("ppm: cannot open '" + path.string() + "' for writing");
  const int h = image.dim(1), w = image.dim(2);
  os << "P6\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(std::size_t(w) * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = (double(image.data[(std::size_t(c) * h + y) * w + x]) + 1.0) * 127.5;
        row[std::size_t(x) * 3 + c] = (unsigned char)std::clamp(std::lround(v), 0L, 255L);
      }
    os.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
  }
  if (!os) throw IOError("ppm: write failed for '" + path.string() + "'");
}

Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IOError("ppm: cannot open '" + path.string() + "'");
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255)
    throw IOError("ppm: unsupported header in '" + path.string() + "'");
  is.get();  // the single whitespace after maxval
  std::vector<unsigned char> buf(std::size_t(w) * h * 3);
  is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
  if (is.gcount() != std::streamsize(buf.size()))
    throw IOError("ppm: truncated pixel data in '" + path.string() + "'");
  Tensor img({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.data[(std::size_t(c) * h + y) * w + x] =
            float(buf[(std::size_t(y) * w + x) * 3 + c] / 127.5 - 1.0);
  return img;
}

namespace {

void write_manifest(const std::filesystem::path& path,
                    const std::array<std::vector<SyntheticSample>, AgeCluster::count>& buckets,
                    const char* split_name) {
  std::ofstream os(path);
  if (!os) throw IOError("manifest: cannot open '" + path.string() + "'");
  os << "sample_id,split,cluster,age_years,identity_index,cx,cy,ax,ay,skin_r,skin_g,skin_b,"
        "eye_spacing,eye_height,mouth_width,hair_region_height,hair_r,hair_g,hair_b\n";
  char line[512];
  for (const auto& bucket : buckets)
    for (const auto& s : bucket) {
      const auto& id = s.identity;
      std::snprintf(line, sizeof(line),
                    "%d,%s,%d,%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                    "%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    s.sample_id, split_name, s.cluster, s.age_years, s.identity_index, id.cx,
                    id.cy, id.ax, id.ay, id.skin[0], id.skin[1], id.skin[2], id.eye_spacing,
                    id.eye_height, id.mouth_width, id.hair_region_height, id.hair[0], id.hair[1],
                    id.hair[2]);
      os << line;
    }
  if (!os) throw IOError("manifest: write failed for '" + path.string() + "'");
}

}  // namespace

void export_dataset(const DatasetPartition& partition, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "images" / "train", ec);
  fs::create_directories(dir / "images" / "test", ec);
  if (ec) throw IOError("dataset: cannot create '" + dir.string() + "'");
  write_manifest(dir / "manifest_train.csv", partition.train, "train");
  write_manifest(dir / "manifest_test.csv", partition.test, "test");
  char name[64];
  for (int split = 0; split < 2; ++split)
    for (int c = 0; c < AgeCluster::count; ++c)
      for (const auto& s : partition.cluster(split, c)) {
        std::snprintf(name, sizeof(name), "s%06d.ppm", s.sample_id);
        write_ppm(dir / "images" / (split == 0 ? "train" : "test") / name, s.image);
      }
}

}  // namespace pagn

#include "eval/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace asl::eval {

namespace {

std::string find_image(const fs::path& dir, int index) {
  for (const char* ext : {".ppm", ".pgm"}) {
    const fs::path p = dir / (std::to_string(index) + ext);
    if (fs::exists(p)) return p.string();
  }
  return {};
}

bool is_sequence_dir(const fs::path& dir) {
  return !find_image(dir, 1).empty();
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt(*v) : std::string("-");
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& vals) {
  double acc = 0.0;
  int n = 0;
  for (const auto& v : vals)
    if (v) {
      acc += *v;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return acc / n;
}

// Runs fn(i) for i in [0, n) over `threads` workers; results land in
// pre-sized slots so aggregation order never depends on scheduling.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, threads);
  if (threads == 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(threads, n); ++t)
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  for (std::thread& th : pool) th.join();
}

}  // namespace

std::optional<double> HPatchesReport::mean_repeatability() const {
  std::vector<std::optional<double>> v;
  for (const auto& r : rows)
    if (!r.skipped) v.push_back(r.repeatability);
  return mean_of(v);
}

std::optional<double> HPatchesReport::mean_matching_score() const {
  std::vector<std::optional<double>> v;
  for (const auto& r : rows)
    if (!r.skipped) v.push_back(r.matching_score);
  return mean_of(v);
}

std::array<std::optional<double>, 10> HPatchesReport::mean_mma() const {
  std::array<std::optional<double>, 10> out;
  for (int t = 0; t < 10; ++t) {
    std::vector<std::optional<double>> v;
    for (const auto& r : rows)
      if (!r.skipped) v.push_back(r.mma[t]);
    out[t] = mean_of(v);
  }
  return out;
}

std::string HPatchesReport::tsv() const {
  std::ostringstream os;
  os << "sequence\tpair\tkeypoints_a\tkeypoints_b\tmatches\trep\tms";
  for (int t = 1; t <= 10; ++t) os << "\tmma@" << t;
  os << "\n";
  for (const auto& r : rows) {
    if (r.skipped) {
      os << r.sequence << "\t1_" << r.target_index << "\tskipped: "
         << r.skip_reason << "\n";
      continue;
    }
    os << r.sequence << "\t1_" << r.target_index << "\t" << r.keypoints_a
       << "\t" << r.keypoints_b << "\t" << r.matches << "\t"
       << fmt_opt(r.repeatability) << "\t" << fmt_opt(r.matching_score);
    for (int t = 0; t < 10; ++t) os << "\t" << fmt_opt(r.mma[t]);
    os << "\n";
  }
  return os.str();
}

std::string HPatchesReport::summary() const {
  std::ostringstream os;
  os << "pairs evaluated: " << pairs_evaluated
     << ", skipped: " << pairs_skipped << "\n";
  os << "  %Rep:    " << fmt_opt(mean_repeatability()) << "\n";
  os << "  %M.S.:   " << fmt_opt(mean_matching_score()) << "\n";
  const auto mma = mean_mma();
  os << "  %MMA@3:  " << fmt_opt(mma[2]) << "\n";
  os << "  %MMA 1..10:";
  for (int t = 0; t < 10; ++t) os << " " << fmt_opt(mma[t]);
  os << "\n";
  return os.str();
}

HPatchesReport eval_hpatches(const pipeline::Extractor& extractor,
                             const std::string& root,
                             const HPatchesOptions& opt) {
  const fs::path rootp(root);
  if (!fs::exists(rootp))
    raise(ErrorKind::kIo, "dataset directory not found: " + root);

  std::vector<fs::path> sequences;
  if (is_sequence_dir(rootp)) {
    sequences.push_back(rootp);
  } else {
    for (const auto& entry : fs::directory_iterator(rootp))
      if (entry.is_directory() && is_sequence_dir(entry.path()))
        sequences.push_back(entry.path());
    std::sort(sequences.begin(), sequences.end());
  }
  if (sequences.empty())
    raise(ErrorKind::kFormat, "no sequences found under: " + root);

  struct PairTask {
    fs::path dir;
    std::string seq_name;
    int target = 0;
  };
  std::vector<PairTask> tasks;
  for (const fs::path& seq : sequences)
    for (int k = 2; k <= 6; ++k)
      tasks.push_back({seq, seq.filename().string(), k});

  HPatchesReport report;
  report.rows.resize(tasks.size());

  // Reference features are shared across the 5 pairs of a sequence.
  std::map<std::string, detect::FeatureSet> ref_cache;
  std::mutex cache_mutex;
  auto ref_features = [&](const fs::path& dir) -> const detect::FeatureSet& {
    const std::string key = dir.string();
    {
      std::lock_guard<std::mutex> lock(cache_mutex);
      auto it = ref_cache.find(key);
      if (it != ref_cache.end()) return it->second;
    }
    detect::FeatureSet fs_ref = extractor.extract(load_image(find_image(dir, 1)));
    std::lock_guard<std::mutex> lock(cache_mutex);
    return ref_cache.emplace(key, std::move(fs_ref)).first->second;
  };

  parallel_for(static_cast<int>(tasks.size()), opt.threads, [&](int i) {
    const PairTask& task = tasks[i];
    HPatchesPairRow& row = report.rows[i];
    row.sequence = task.seq_name;
    row.target_index = task.target;
    try {
      const std::string img_b = find_image(task.dir, task.target);
      const fs::path h_path = task.dir / ("H_1_" + std::to_string(task.target));
      if (img_b.empty() || !fs::exists(h_path)) {
        row.skipped = true;
        row.skip_reason = "missing image or homography";
        return;
      }
      const detect::FeatureSet& fa = ref_features(task.dir);
      const Image image_b = load_image(img_b);
      const detect::FeatureSet fb = extractor.extract(image_b);

      match::HomographyGT gt;
      gt.H = match::read_mat3(h_path.string());
      gt.size_a = {fa.image_width, fa.image_height};
      gt.size_b = {fb.image_width, fb.image_height};

      const match::MatchSet ms = match::match_descriptors(fa, fb, opt.match);
      row.keypoints_a = static_cast<int>(fa.count());
      row.keypoints_b = static_cast<int>(fb.count());
      row.matches = static_cast<int>(ms.matches.size());
      row.repeatability =
          match::repeatability(fa.keypoints, fb.keypoints, gt, opt.threshold);
      row.matching_score =
          match::match_metrics(ms, fa.keypoints, fb.keypoints, gt, opt.threshold)
              .matching_score;
      row.mma = match::mma_curve(ms, fa.keypoints, fb.keypoints, gt);
    } catch (const Error& e) {
      row.skipped = true;
      row.skip_reason = e.what();
    }
  });

  for (const auto& r : report.rows)
    (r.skipped ? report.pairs_skipped : report.pairs_evaluated) += 1;
  return report;
}

double EpipolarReport::recall_pct() const {
  int total = 0, recalled = 0;
  for (const auto& r : rows) {
    if (r.skipped) continue;
    ++total;
    if (r.recalled) ++recalled;
  }
  return total == 0 ? 0.0 : 100.0 * recalled / total;
}

std::optional<double> EpipolarReport::mean_inlier_pct() const {
  std::vector<std::optional<double>> v;
  for (const auto& r : rows)
    if (!r.skipped) v.push_back(r.inlier_pct);
  return mean_of(v);
}

std::optional<double> EpipolarReport::mean_inlier_m_pct() const {
  std::vector<std::optional<double>> v;
  for (const auto& r : rows)
    if (!r.skipped) v.push_back(r.inlier_m_pct);
  return mean_of(v);
}

double EpipolarReport::mean_corrs() const {
  double acc = 0.0;
  int n = 0;
  for (const auto& r : rows)
    if (!r.skipped) {
      acc += r.corrs;
      ++n;
    }
  return n == 0 ? 0.0 : acc / n;
}

double EpipolarReport::mean_corrs_m() const {
  double acc = 0.0;
  int n = 0;
  for (const auto& r : rows)
    if (!r.skipped) {
      acc += r.corrs_m;
      ++n;
    }
  return n == 0 ? 0.0 : acc / n;
}

std::string EpipolarReport::tsv() const {
  std::ostringstream os;
  os << "image_a\timage_b\testimate_ok\trecalled\tmean_dist\tcorrs\tcorrs_m"
        "\tinlier_pct\tinlier_m_pct\n";
  for (const auto& r : rows) {
    if (r.skipped) {
      os << r.image_a << "\t" << r.image_b << "\tskipped: " << r.skip_reason
         << "\n";
      continue;
    }
    char dist[48];
    std::snprintf(dist, sizeof(dist), "%.3e", r.mean_distance);
    os << r.image_a << "\t" << r.image_b << "\t" << (r.estimate_ok ? 1 : 0)
       << "\t" << (r.recalled ? 1 : 0) << "\t" << dist << "\t" << r.corrs
       << "\t" << r.corrs_m << "\t" << fmt_opt(r.inlier_pct) << "\t"
       << fmt_opt(r.inlier_m_pct) << "\n";
  }
  return os.str();
}

std::string EpipolarReport::summary() const {
  std::ostringstream os;
  os << "pairs evaluated: " << pairs_evaluated
     << ", skipped: " << pairs_skipped << "\n";
  os << "  %Recall:    " << fmt(recall_pct()) << "\n";
  os << "  %Inlier:    " << fmt_opt(mean_inlier_pct()) << "\n";
  os << "  %Inlier-m:  " << fmt_opt(mean_inlier_m_pct()) << "\n";
  os << "  #Corrs:     " << fmt(mean_corrs()) << "\n";
  os << "  #Corrs-m:   " << fmt(mean_corrs_m()) << "\n";
  return os.str();
}

EpipolarReport eval_epipolar(const pipeline::Extractor& extractor,
                             const std::string& pairs_file,
                             const EpipolarOptions& opt) {
  std::ifstream in(pairs_file);
  if (!in) raise(ErrorKind::kIo, "cannot open pair list: " + pairs_file);
  const fs::path base = fs::path(pairs_file).parent_path();
  auto resolve = [&base](const std::string& p) {
    const fs::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };

  struct PairTask {
    std::string img_a, img_b, f_file;
  };
  std::vector<PairTask> tasks;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    PairTask t;
    if (!(ls >> t.img_a >> t.img_b >> t.f_file)) continue;  // blank/comment
    tasks.push_back(t);
  }
  if (tasks.empty())
    raise(ErrorKind::kFormat, "no pairs in list: " + pairs_file);

  EpipolarReport report;
  report.rows.resize(tasks.size());

  std::map<std::string, detect::FeatureSet> cache;
  std::mutex cache_mutex;
  auto features_of = [&](const std::string& path) -> const detect::FeatureSet& {
    {
      std::lock_guard<std::mutex> lock(cache_mutex);
      auto it = cache.find(path);
      if (it != cache.end()) return it->second;
    }
    detect::FeatureSet fs_new = extractor.extract(load_image(path));
    std::lock_guard<std::mutex> lock(cache_mutex);
    return cache.emplace(path, std::move(fs_new)).first->second;
  };

  parallel_for(static_cast<int>(tasks.size()), opt.threads, [&](int i) {
    const PairTask& task = tasks[i];
    EpipolarPairRow& row = report.rows[i];
    row.image_a = task.img_a;
    row.image_b = task.img_b;
    try {
      const detect::FeatureSet& fa = features_of(resolve(task.img_a));
      const detect::FeatureSet& fb = features_of(resolve(task.img_b));
      match::FundamentalGT gt;
      gt.F = match::read_mat3(resolve(task.f_file));
      gt.size_a = {fa.image_width, fa.image_height};
      gt.size_b = {fb.image_width, fb.image_height};

      const match::MatchSet ms = match::match_descriptors(fa, fb, opt.match);
      row.corrs_m = static_cast<int>(ms.matches.size());

      std::vector<geom::Vec2> pa, pb;
      for (const match::Match& m : ms.matches) {
        pa.push_back({fa.keypoints[m.index_a].x, fa.keypoints[m.index_a].y});
        pb.push_back({fb.keypoints[m.index_b].x, fb.keypoints[m.index_b].y});
      }

      // GT-consistency of the raw matches.
      int gt_ok_m = 0;
      for (size_t k = 0; k < pa.size(); ++k) {
        const auto d = match::symmetric_epipolar_distance(pa[k], pb[k], gt.F,
                                                          gt.size_a, gt.size_b);
        if (d && *d < opt.ransac_threshold) ++gt_ok_m;
      }
      if (!pa.empty()) row.inlier_m_pct = 100.0 * gt_ok_m / pa.size();

      match::RansacOptions ropt;
      ropt.iterations = opt.ransac_iterations;
      ropt.inlier_threshold = opt.ransac_threshold;
      ropt.seed = opt.ransac_seed;
      ropt.size_a = gt.size_a;
      ropt.size_b = gt.size_b;
      const match::RansacResult rr =
          match::estimate_fundamental_ransac(pa, pb, ropt);
      row.estimate_ok = rr.success;
      if (rr.success) {
        row.corrs = rr.inlier_count;
        int gt_ok = 0;
        int total = 0;
        for (size_t k = 0; k < pa.size(); ++k) {
          if (!rr.inlier_mask[k]) continue;
          ++total;
          const auto d = match::symmetric_epipolar_distance(
              pa[k], pb[k], gt.F, gt.size_a, gt.size_b);
          if (d && *d < opt.ransac_threshold) ++gt_ok;
        }
        if (total > 0) row.inlier_pct = 100.0 * gt_ok / total;

        const auto virtuals = match::virtual_correspondences_from_f(
            gt.F, gt.size_a, gt.size_b, opt.virtual_correspondences,
            opt.ransac_seed + 1);
        row.mean_distance =
            match::mean_sed(virtuals, rr.F, gt.size_a, gt.size_b);
        row.recalled = row.mean_distance < opt.recall_threshold;
      }
    } catch (const Error& e) {
      row.skipped = true;
      row.skip_reason = e.what();
    }
  });

  for (const auto& r : report.rows)
    (r.skipped ? report.pairs_skipped : report.pairs_evaluated) += 1;
  return report;
}

}  // namespace asl::eval

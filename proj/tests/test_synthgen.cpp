#include <doctest.h>

#include <set>

#include "neurofuse/dsp.hpp"
#include "neurofuse/io.hpp"
#include "neurofuse/synthgen.hpp"
#include "temp_dir.hpp"

using namespace neurofuse;

namespace {

synth::SynthSpec short_spec(double seconds = 8.0) {
  synth::SynthSpec spec;
  spec.n_participants = 1;
  spec.n_sessions = 1;
  spec.trial_seconds = seconds;
  return spec;
}

// Mean over windows and channels of each band's absolute power.
Eigen::VectorXd band_means(const FeatureMatrix& ps, std::size_t n_bands) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Index>(n_bands));
  const Index channels = ps.cols() / static_cast<Index>(n_bands);
  for (Index c = 0; c < channels; ++c)
    for (Index b = 0; b < static_cast<Index>(n_bands); ++b) out[b] += ps.data.col(c * static_cast<Index>(n_bands) + b).mean();
  return out / static_cast<double>(channels);
}

}  // namespace

TEST_CASE("default spec shapes") {
  const synth::SynthSpec spec;
  CHECK_NOTHROW(spec.validate());
  CHECK(spec.samples_per_trial() == 72000);
  CHECK(spec.eye_rows() == 18);
  CHECK(spec.total_trials() == 16u * 3u * 15u);
  CHECK(spec.class_profiles.rows() == 5);
  CHECK(spec.class_profiles.cols() == 6);
  CHECK(spec.eye_class_means.rows() == 5);
  CHECK(spec.eye_class_means.cols() == 33);

  Rng rng(1);
  const auto t = synth::generate_trial(EmotionLabel::from_code(2), spec, rng);
  CHECK(t.raw.samples.rows() == 66);
  CHECK(t.raw.samples.cols() == 72000);
  CHECK(t.raw.label.code() == 2);
  CHECK(t.eye.rows() == 18);
  CHECK(t.eye.cols() == 33);
  CHECK(t.eye.kind == FeatureKind::eye);
  CHECK(t.raw.samples.allFinite());
}

TEST_CASE("default class profiles") {
  const auto p = synth::default_class_profiles(6);
  for (Index c = 0; c < 5; ++c)
    for (Index b = 0; b < 6; ++b) CHECK(p(c, b) == (b == (c + 1) % 6 ? 2.0 : 1.0));
  CHECK(synth::default_eye_class_means() == synth::default_eye_class_means());
}

TEST_CASE("spec validation") {
  auto spec = short_spec();
  spec.n_sessions = 4;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = short_spec();
  spec.trials_per_session = 7;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = short_spec();
  spec.drift_depth = 1.0;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = short_spec();
  spec.class_profiles(0, 0) = -1.0;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = short_spec();
  spec.trial_seconds = 3.0;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = short_spec();
  spec.noise_level = -0.1;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("spec json round trip") {
  auto spec = short_spec(12.0);
  spec.noise_level = 0.4;
  spec.rng_seed = 77;
  spec.class_profiles(3, 2) = 5.5;
  const nlohmann::json j = spec;
  const auto back = j.get<synth::SynthSpec>();
  CHECK(nlohmann::json(back) == j);
  CHECK(back.class_profiles == spec.class_profiles);
  CHECK(back.eye_class_means == spec.eye_class_means);
}

TEST_CASE("generation is seed-determined") {
  const auto spec = short_spec(4.0);
  Rng a(9), b(9), c(10);
  const auto ta = synth::generate_trial(EmotionLabel::from_code(1), spec, a);
  const auto tb = synth::generate_trial(EmotionLabel::from_code(1), spec, b);
  const auto tc = synth::generate_trial(EmotionLabel::from_code(1), spec, c);
  CHECK(ta.raw.samples == tb.raw.samples);
  CHECK(ta.eye.data == tb.eye.data);
  CHECK(ta.raw.samples != tc.raw.samples);
}

TEST_CASE("session schedules are balanced with no immediate repeats") {
  Rng rng(3);
  for (int trials : {5, 10, 15}) {
    auto spec = short_spec();
    spec.trials_per_session = trials;
    for (int rep = 0; rep < 200; ++rep) {
      const auto s = synth::session_schedule(spec, rng);
      REQUIRE(s.size() == static_cast<std::size_t>(trials));
      std::array<int, 5> counts{};
      for (std::size_t i = 0; i < s.size(); ++i) {
        ++counts[static_cast<std::size_t>(s[i].code())];
        if (i > 0) CHECK(s[i] != s[i - 1]);
      }
      for (int n : counts) CHECK(n == trials / 5);
    }
  }
}

TEST_CASE("corpus plan order and seeds") {
  auto spec = short_spec();
  spec.n_participants = 2;
  spec.n_sessions = 3;
  const auto plans = synth::plan_corpus(spec);
  REQUIRE(plans.size() == 90);
  std::set<std::uint64_t> seeds;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    CHECK(plans[i].participant == static_cast<int>(i / 45) + 1);
    CHECK(plans[i].session == static_cast<int>(i / 15 % 3) + 1);
    CHECK(plans[i].trial == static_cast<int>(i % 15) + 1);
    seeds.insert(plans[i].seed);
  }
  CHECK(seeds.size() == 90);

  // a participant's trials do not depend on how many others are generated
  spec.n_participants = 1;
  const auto one = synth::plan_corpus(spec);
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].seed == plans[i].seed);
    CHECK(one[i].label == plans[i].label);
  }
  spec.rng_seed = 1;
  CHECK(synth::plan_corpus(spec).front().seed != plans.front().seed);
}

TEST_CASE("noise-free one-hot profiles peak in their band") {
  // Band 0 (0.5-4 Hz) has no DFT bin at a 5 Hz bin spacing, so only bands
  // 1..5 can be probed with the default window.
  auto spec = short_spec(4.0);
  spec.noise_level = 0.0;
  PipelineConfig cfg;
  for (Index band = 1; band < 6; ++band) {
    spec.class_profiles.setZero();
    spec.class_profiles(0, band) = 1.0;
    Rng rng(static_cast<std::uint64_t>(band));
    const auto t = synth::generate_trial(EmotionLabel::from_code(0), spec, rng);
    const auto ps = dsp::extract_power_spectrum(t.raw, cfg);
    for (Index c = 0; c < 66; ++c) {
      Index arg;
      ps.data.middleCols(c * 6, 6).colwise().sum().maxCoeff(&arg);
      INFO("band " << band << " channel " << c);
      CHECK(arg == band);
    }
  }
}

TEST_CASE("eye features are centred on the class means") {
  auto spec = short_spec(72.0);
  spec.noise_level = 0.0;
  Rng rng(4);
  const auto t = synth::generate_trial(EmotionLabel::from_code(3), spec, rng);
  for (Index r = 0; r < t.eye.rows(); ++r) CHECK(t.eye.data.row(r) == spec.eye_class_means.row(3));
}

TEST_CASE("classes are separable at the default noise level") {
  const auto spec = short_spec(8.0);
  PipelineConfig cfg;
  std::array<Eigen::VectorXd, 5> ps_means;
  std::array<Eigen::RowVectorXd, 5> eye_means;
  const int per_class = 3;
  for (int c = 0; c < 5; ++c) {
    ps_means[static_cast<std::size_t>(c)] = Eigen::VectorXd::Zero(6);
    eye_means[static_cast<std::size_t>(c)] = Eigen::RowVectorXd::Zero(33);
    for (int k = 0; k < per_class; ++k) {
      Rng rng(derive_seed(500, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(k)));
      const auto t = synth::generate_trial(EmotionLabel::from_code(c), spec, rng);
      ps_means[static_cast<std::size_t>(c)] += band_means(dsp::extract_power_spectrum(t.raw, cfg), 6) / per_class;
      eye_means[static_cast<std::size_t>(c)] += t.eye.data.colwise().mean() / per_class;
    }
  }
  for (int c = 0; c < 5; ++c) {
    const Index boosted = (c + 1) % 6;
    for (int o = 0; o < 5; ++o) {
      if (o == c) continue;
      CHECK(ps_means[static_cast<std::size_t>(c)][boosted] > ps_means[static_cast<std::size_t>(o)][boosted]);
    }
    // nearest true class mean recovers the label from the eye block
    Index nearest;
    (spec.eye_class_means.rowwise() - eye_means[static_cast<std::size_t>(c)]).rowwise().squaredNorm().minCoeff(&nearest);
    CHECK(nearest == c);
  }
}

TEST_CASE("on-disk corpus and manifest") {
  TempDir dir("synth");
  auto spec = short_spec(4.0);
  spec.trials_per_session = 5;
  const auto manifest = synth::generate_corpus(spec, dir.path());
  REQUIRE(manifest.trials.size() == 5);
  std::size_t npy = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path()))
    if (e.path().extension() == ".npy") ++npy;
  CHECK(npy == 10);
  CHECK(std::filesystem::exists(dir / "manifest.json"));
  CHECK(std::filesystem::exists(dir / "1_1_3_raw.npy"));
  CHECK(std::filesystem::exists(dir / "1_1_3_EYE.npy"));

  const auto loaded = io::Manifest::load(dir.path());
  REQUIRE(loaded.trials.size() == 5);
  CHECK(loaded.provenance.at("source") == "synthetic");
  CHECK(loaded.provenance.at("synth_spec") == nlohmann::json(spec));
  const auto plans = synth::plan_corpus(spec);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(loaded.trials[i].label == plans[i].label);
    CHECK(loaded.trials[i].trial == plans[i].trial);
  }
  const auto expect = synth::generate_planned(plans[2], spec);
  CHECK(io::read_npy_matrix(loaded.raw_file(loaded.trials[2])) == expect.raw.samples);
  CHECK(io::read_npy_matrix(loaded.eye_file(loaded.trials[2])) == expect.eye.data);
}

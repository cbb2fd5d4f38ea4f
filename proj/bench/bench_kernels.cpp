// Serial reference vs OpenMP kernels on pipeline-sized inputs.
// Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "rgbd/evaluation.hpp"
#include "rgbd/kernels.hpp"
#include "rgbd/pipeline.hpp"

using namespace rgbd;

namespace {

const RgbdFrame& room_frame() {
    static const RgbdFrame frame = [] {
        SynthConfig c;
        c.render = true;
        return render_frame(RigidTransform::identity(), CameraIntrinsics::standard(), c, nullptr);
    }();
    return frame;
}

const FeatureSet& features(int which) {
    static const std::array<FeatureSet, 2> sets = [] {
        const auto k = CameraIntrinsics::standard();
        SynthConfig c;
        c.render = true;
        const RgbdFrame a = render_frame(RigidTransform::identity(), k, c, nullptr);
        const RgbdFrame b = render_frame(RigidTransform::from_translation(0.01, 0, 0), k, c, nullptr);
        const PipelineConfig cfg;
        return std::array<FeatureSet, 2>{extract_features(a, k, cfg), extract_features(b, k, cfg)};
    }();
    return sets[static_cast<std::size_t>(which)];
}

struct Cloud {
    std::vector<Vec3> a, b, sa, sb;
    std::vector<RigidTransform> models;
};

const Cloud& cloud() {
    static const Cloud c = [] {
        Cloud out;
        const auto k = CameraIntrinsics::standard();
        Rng rng(1);
        for (int i = 0; i < 1000; ++i) {
            const Vec3 p = back_project(rng.uniform(16, 624), rng.uniform(16, 464), rng.uniform(1.5, 2.5), k);
            const Vec2 px = project(p, k);
            out.a.push_back(p);
            out.b.push_back(p + Vec3(0.01, 0, 0));
            out.sa.push_back(noise_sigma(px.x(), px.y(), p.z(), k));
            out.sb.push_back(out.sa.back());
        }
        for (int i = 0; i < 200; ++i) {
            out.models.push_back(RigidTransform::from_translation(rng.uniform(-0.02, 0.02), 0, 0));
        }
        return out;
    }();
    return c;
}

template <Exec E>
void BM_SegmentTest(benchmark::State& state) {
    const RgbdFrame& f = room_frame();
    for (auto _ : state) {
        auto s = E == Exec::serial ? serial::segment_test_scores(f.intensity, f.valid, 20, 9, 16)
                                   : parallel::segment_test_scores(f.intensity, f.valid, 20, 9, 16);
        benchmark::DoNotOptimize(s);
    }
}

template <Exec E>
void BM_BoxSum(benchmark::State& state) {
    const RgbdFrame& f = room_frame();
    for (auto _ : state) {
        auto s = E == Exec::serial ? serial::box_sum5(f.intensity) : parallel::box_sum5(f.intensity);
        benchmark::DoNotOptimize(s);
    }
}

template <Exec E>
void BM_Hamming(benchmark::State& state) {
    const FeatureSet& a = features(0);
    const FeatureSet& b = features(1);
    for (auto _ : state) {
        auto d = E == Exec::serial ? serial::hamming_distances(a.binary_data(), b.binary_data(), a.words())
                                   : parallel::hamming_distances(a.binary_data(), b.binary_data(), a.words());
        benchmark::DoNotOptimize(d);
    }
    state.counters["pairs"] = static_cast<double>(a.size() * b.size());
}

template <Exec E>
void BM_ScoreHypotheses(benchmark::State& state) {
    const Cloud& c = cloud();
    for (auto _ : state) {
        auto s = E == Exec::serial ? serial::score_hypotheses(c.models, c.a, c.b, 0.05)
                                   : parallel::score_hypotheses(c.models, c.a, c.b, 0.05);
        benchmark::DoNotOptimize(s);
    }
}

template <Exec E>
void BM_Perturbation(benchmark::State& state) {
    const Cloud& c = cloud();
    PerturbationBatch batch{c.a, c.b, c.sa, c.sb, 7, 100};
    for (auto _ : state) {
        auto t = E == Exec::serial ? serial::perturbation_trials(batch) : parallel::perturbation_trials(batch);
        benchmark::DoNotOptimize(t);
    }
}

}  // namespace

BENCHMARK(BM_SegmentTest<Exec::serial>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SegmentTest<Exec::parallel>)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BoxSum<Exec::serial>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BoxSum<Exec::parallel>)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Hamming<Exec::serial>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Hamming<Exec::parallel>)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ScoreHypotheses<Exec::serial>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreHypotheses<Exec::parallel>)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Perturbation<Exec::serial>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Perturbation<Exec::parallel>)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();

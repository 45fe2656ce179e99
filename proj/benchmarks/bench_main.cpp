#include <benchmark/benchmark.h>

#include <map>

#include "radrep/measurement.hpp"
#include "radrep/morphology.hpp"
#include "radrep/phantom.hpp"
#include "radrep/pipeline.hpp"
#include "radrep/postprocess.hpp"
#include "radrep/staging.hpp"
#include "radrep/subsegment.hpp"

using namespace radrep;

namespace {

const phantom::Phantom& scenario(const std::string& name) {
    static std::map<std::string, phantom::Phantom> cache;
    auto it = cache.find(name);
    if (it == cache.end()) it = cache.emplace(name, phantom::generate(phantom::scenario(name))).first;
    return it->second;
}

pipeline::CaseInputs inputs(const std::string& name) {
    const auto& p = scenario(name);
    return {name, p.volume, p.masks, std::nullopt};
}

void BM_Denoise(benchmark::State& state) {
    const Mask& m = scenario("noisy").masks.at("pancreatic_tumor");
    for (auto _ : state) benchmark::DoNotOptimize(postprocess::denoise(m));
}
BENCHMARK(BM_Denoise)->Unit(benchmark::kMillisecond);

void BM_SplitInstances(benchmark::State& state) {
    const Mask& m = scenario("liver_24").masks.at("liver_tumor");
    for (auto _ : state) benchmark::DoNotOptimize(measurement::split_instances(m, Organ::Liver));
}
BENCHMARK(BM_SplitInstances)->Unit(benchmark::kMillisecond);

void BM_MeasureWho(benchmark::State& state) {
    const auto inst = measurement::split_instances(scenario("pancreas_large").masks.at("pancreatic_tumor"),
                                                   Organ::Pancreas);
    for (auto _ : state) benchmark::DoNotOptimize(measurement::measure_who(inst.front()));
}
BENCHMARK(BM_MeasureWho)->Unit(benchmark::kMillisecond);

void BM_Subsegment(benchmark::State& state) {
    const auto& p = scenario("control");
    for (auto _ : state)
        benchmark::DoNotOptimize(subsegment::subsegment_pancreas(p.masks.at("pancreas"), p.masks.at("SMA")));
}
BENCHMARK(BM_Subsegment)->Unit(benchmark::kMillisecond);

void BM_ContactAngle(benchmark::State& state) {
    const auto& p = scenario("t4_encasement");
    const Mask& tumor = p.masks.at("pancreatic_tumor");
    const Mask sma = staging::isolate_main_branch(p.masks.at("SMA"));
    for (auto _ : state) benchmark::DoNotOptimize(staging::contact_angle(tumor, sma, staging::Vessel::SMA));
}
BENCHMARK(BM_ContactAngle)->Unit(benchmark::kMillisecond);

void BM_BuildReport(benchmark::State& state, const char* name) {
    const auto in = inputs(name);
    Config cfg;
    cfg.mode = report::GenerationMode::Automated;
    for (auto _ : state) benchmark::DoNotOptimize(pipeline::build_report(in, cfg));
}
BENCHMARK_CAPTURE(BM_BuildReport, t4_encasement, "t4_encasement")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_BuildReport, liver_24, "liver_24")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_BuildReport, desk256, "desk256")->Unit(benchmark::kMillisecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "heliofarm/core/text.hpp"
#include "heliofarm/devs/coordinator.hpp"
#include "heliofarm/farm/synth.hpp"
#include "heliofarm/farm/world.hpp"

namespace {

using namespace heliofarm;
using namespace heliofarm::farm;
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("heliofarm_farm_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Timestamp at(const char* text) { return parse_datetime(text); }

// Emits scheduled bags on `out`.
template <class T>
class Emitter : public devs::Atomic {
 public:
  Emitter(std::string name, std::vector<std::pair<Timestamp, std::vector<T>>> plan)
      : devs::Atomic(std::move(name)), plan_(std::move(plan)) {}

  devs::OutPort<T> out{*this, "out"};

  void initialize() override { schedule(); }
  void lambda() override {
    for (const auto& v : plan_[next_].second) out.add(v);
  }
  void delta_int() override {
    ++next_;
    schedule();
  }
  void delta_ext(devs::SimTime e) override { resume(e); }

 private:
  void schedule() {
    if (next_ < plan_.size()) {
      hold_in("wait", to_sim(plan_[next_].first) - now());
    } else {
      passivate();
    }
  }
  std::vector<std::pair<Timestamp, std::vector<T>>> plan_;
  std::size_t next_ = 0;
};

template <class T>
class Sink : public devs::Atomic {
 public:
  using devs::Atomic::Atomic;
  devs::InPort<T> in{*this, "in"};
  std::vector<std::pair<Timestamp, T>> got;
  std::vector<devs::SimTime> when;

  void lambda() override {}
  void delta_int() override {}
  void delta_ext(devs::SimTime) override {
    for (const auto& v : in) {
      got.emplace_back(calendar_now(), *v);
      when.push_back(now());
    }
  }
};

devs::CoordinatorOptions options_at(const char* epoch, std::uint64_t seed = 1) {
  devs::CoordinatorOptions o;
  o.seed = seed;
  o.epoch = at(epoch);
  return o;
}

// ---------------------------------------------------------------- commands

constexpr const char* kHeader = "DATETIME;COMMAND;ARGUMENTS\n";

TEST(Commands, ActivateSensorsLine) {
  const auto cmds = parse_simulation_file(std::string(kHeader) + "2010-06-01 00:00:00;CMD_ACTIVATE_SENSORS;Oahu;oahu.csv\n");
  ASSERT_EQ(cmds.size(), 1u);
  EXPECT_EQ(cmds[0].kind, CommandKind::activate_sensors);
  EXPECT_EQ(cmds[0].args, (std::vector<std::string>{"Oahu", "oahu.csv"}));
  EXPECT_EQ(cmds[0].at, at("2010-06-01 00:00:00"));
  EXPECT_EQ(cmds[0].farm(), "Oahu");
}

TEST(Commands, HeaderOnlyIsEmpty) {
  EXPECT_TRUE(parse_simulation_file(kHeader).empty());
}

TEST(Commands, UnknownKindNamesTheLine) {
  try {
    parse_simulation_file(std::string(kHeader) + "2010-06-27 00:00:00;CMD_BOGUS;x\n");
    FAIL() << "accepted CMD_BOGUS";
  } catch (const ScriptError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_NE(std::string(e.what()).find("CMD_BOGUS"), std::string::npos);
  }
}

TEST(Commands, ArityErrorNamesSchema) {
  try {
    parse_simulation_file(std::string(kHeader) + "2010-06-01 00:00:00;CMD_TRAIN_MODEL;local;Oahu\n");
    FAIL();
  } catch (const ScriptError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("endpoint"), std::string::npos) << what;
    EXPECT_NE(what.find("epochs"), std::string::npos) << what;
  }
}

TEST(Commands, MonotonicPerFarmOnly) {
  const std::string interleaved = std::string(kHeader) +
                                  "2010-06-01 02:00:00;CMD_PASSIVATE_SENSORS;A\n"
                                  "2010-06-01 01:00:00;CMD_PASSIVATE_SENSORS;B\n";
  EXPECT_EQ(parse_simulation_file(interleaved).size(), 2u);
  const std::string backwards = std::string(kHeader) +
                                "2010-06-01 02:00:00;CMD_PASSIVATE_SENSORS;A\n"
                                "2010-06-01 01:00:00;CMD_ACTIVATE_SENSORS;A;a.csv\n";
  EXPECT_THROW(parse_simulation_file(backwards), ScriptError);
}

TEST(Commands, ScriptMustBeBracketed) {
  auto cmds = parse_simulation_file(std::string(kHeader) +
                                    "2010-06-01 00:00:00;ACTIVATE\n"
                                    "2010-06-01 00:00:00;CMD_ACTIVATE_SENSORS;A;a.csv\n");
  const std::vector<std::string> farms{"A"};
  EXPECT_THROW(validate_script(cmds, farms), ScriptError);
  cmds.push_back(parse_simulation_file(std::string(kHeader) + "2010-06-02 00:00:00;PASSIVATE\n")[0]);
  EXPECT_NO_THROW(validate_script(cmds, farms));
  const std::vector<std::string> other{"B"};
  EXPECT_THROW(validate_script(cmds, other), ScriptError);
}

TEST(Commands, TypedArguments) {
  const auto cmds = parse_simulation_file(std::string(kHeader) +
                                          "2010-06-01 00:00:00;CMD_RUN_PREDICTION;A;2010-06-02;61,1,11;estimated;pred\n"
                                          "2010-06-01 00:00:00;CMD_FIX_OUTLIERS;A;S1;2010-06-01;2010-06-02;linear;0.95\n");
  const auto p = run_prediction_args(cmds[0]);
  EXPECT_EQ(p.horizons, (std::vector<int>{1, 11, 61}));
  EXPECT_EQ(p.date, parse_date("2010-06-02"));
  EXPECT_EQ(p.out_db, "pred");
  const auto f = fix_outliers_args(cmds[1]);
  EXPECT_DOUBLE_EQ(f.level, 0.95);
  EXPECT_EQ(f.method, anomaly::RepairMethod::linear);
  EXPECT_THROW(parse_simulation_file(std::string(kHeader) +
                                     "2010-06-01 00:00:00;CMD_FIX_OUTLIERS;A;S1;2010-06-01;2010-06-02;linear;1.5\n"),
               ScriptError);
}

// ---------------------------------------------------------------- sensor output

// Independent round-half-to-even on the quotient, through its integer and fractional parts.
double quantize_oracle(double v, double p) {
  const double q = v / p;
  const double lo = std::floor(q);
  const double frac = q - lo;
  double n = lo;
  if (frac > 0.5 || (frac == 0.5 && std::fmod(lo, 2.0) != 0.0)) n = lo + 1.0;
  return n * p;
}

TEST(SensorOutput, Examples) {
  std::mt19937_64 rng(1);
  SensorConfig c;
  c.precision = 1.0;
  EXPECT_DOUBLE_EQ(*sensor_value(c, 500.0, rng), 500.0);
  EXPECT_DOUBLE_EQ(*sensor_value(c, 1500.0, rng), 1400.0);
  c.precision = 0.5;
  EXPECT_DOUBLE_EQ(*sensor_value(c, 432.34, rng), quantize_oracle(432.34, 0.5));
  EXPECT_DOUBLE_EQ(*sensor_value(c, 432.34, rng), 432.5);
  EXPECT_FALSE(sensor_value(c, std::nullopt, rng).has_value());
}

TEST(SensorOutput, HalfToEvenMatchesOracle) {
  for (double v : {0.25, 0.75, 1.25, 2.5, 3.5, 10.0, 432.25, 432.75}) {
    EXPECT_DOUBLE_EQ(quantize(v, 0.5), quantize_oracle(v, 0.5)) << v;
    EXPECT_DOUBLE_EQ(quantize(v, 1.0), quantize_oracle(v, 1.0)) << v;
  }
  EXPECT_DOUBLE_EQ(quantize(2.5, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(quantize(3.5, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantize(7.3, 0.0), 7.3);
}

TEST(SensorOutput, NoisyValuesStayInBounds) {
  std::mt19937_64 rng(9);
  SensorConfig c;
  c.v_min = 0;
  c.v_max = 1000;
  c.precision = 3;
  c.noise_sigma = 50;
  for (double raw : {0.0, 1.0, 999.0, 1000.0}) {
    for (int i = 0; i < 200; ++i) {
      const double v = *sensor_value(c, raw, rng);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1000.0);
    }
  }
}

// ---------------------------------------------------------------- sensor transitions

struct SensorBench : devs::Coupled {
  SensorBench(std::vector<std::pair<Timestamp, std::vector<SensorControl>>> plan, double delay = 0.0)
      : devs::Coupled("bench") {
    auto& d = add<Emitter<SensorControl>>("driver", std::move(plan));
    SensorConfig c;
    c.id = "S1";
    c.farm = "F";
    c.delay = delay;
    sensor = &add<Sensor>(c);
    readings = &add<Sink<SensorReading>>("readings");
    faults = &add<Sink<SensorFault>>("faults");
    couple(d.out, sensor->in_ctl);
    couple(sensor->out, readings->in);
    couple(sensor->fault, faults->in);
  }
  Sensor* sensor;
  Sink<SensorReading>* readings;
  Sink<SensorFault>* faults;
};

std::shared_ptr<const Dataset> three_samples() {
  auto d = std::make_shared<Dataset>();
  auto& s = d->series["S1"];
  s.at = {at("2010-06-01 10:00:00"), at("2010-06-01 10:01:00"), at("2010-06-01 10:02:00")};
  s.ghi = {100.0, std::nullopt, 300.0};
  return d;
}

TEST(SensorTransition, ActivateSchedulesFirstSample) {
  SensorBench bench({{at("2010-06-01 09:59:30"), {{true, "d", three_samples()}}}});
  devs::Coordinator coord(bench, options_at("2010-06-01 00:00:00"));
  coord.cycle();
  EXPECT_EQ(bench.sensor->phase(), "active");
  EXPECT_DOUBLE_EQ(bench.sensor->sigma(), 30.0);
  EXPECT_DOUBLE_EQ(coord.next_time(), 10 * 3600.0);
}

TEST(SensorTransition, ActivateMidSeriesSkipsEarlierSamples) {
  SensorBench bench({{at("2010-06-01 10:00:30"), {{true, "d", three_samples()}}}}, 2.0);
  devs::Coordinator coord(bench, options_at("2010-06-01 00:00:00"));
  coord.cycle();
  EXPECT_DOUBLE_EQ(bench.sensor->sigma(), 30.0 + 2.0);
}

TEST(SensorTransition, PassivateStopsEmission) {
  SensorBench bench({{at("2010-06-01 09:00:00"), {{true, "d", three_samples()}}},
                     {at("2010-06-01 10:01:30"), {{false, {}, nullptr}}}});
  devs::Coordinator coord(bench, options_at("2010-06-01 00:00:00"));
  coord.simulate_until(devs::kInfinity);
  EXPECT_EQ(bench.sensor->sigma(), devs::kInfinity);
  ASSERT_EQ(bench.readings->got.size(), 2u);
  EXPECT_FALSE(bench.readings->got[1].second.ghi.has_value());
  EXPECT_TRUE(bench.faults->got.empty());
}

TEST(SensorTransition, ExhaustedDatasetFaultsOnce) {
  SensorBench bench({{at("2010-06-01 09:00:00"), {{true, "d", three_samples()}}}}, 0.5);
  devs::Coordinator coord(bench, options_at("2010-06-01 00:00:00"));
  coord.simulate_until(devs::kInfinity);
  ASSERT_EQ(bench.readings->got.size(), 3u);
  // Emission happens delay seconds after the nominal time.
  EXPECT_DOUBLE_EQ(bench.readings->when[0], 10 * 3600.0 + 0.5);
  EXPECT_EQ(bench.readings->got[0].second.at, at("2010-06-01 10:00:00"));
  ASSERT_EQ(bench.faults->got.size(), 1u);
  EXPECT_EQ(bench.faults->got[0].second.reason, "exhausted");
  EXPECT_DOUBLE_EQ(bench.faults->when[0], bench.readings->when[2]);
  EXPECT_EQ(bench.sensor->phase(), "passive");
}

TEST(SensorTransition, UnknownDatasetFaultsAndStaysPassive) {
  SensorBench bench({{at("2010-06-01 09:00:00"), {{true, "missing.csv", nullptr}}}});
  devs::Coordinator coord(bench, options_at("2010-06-01 00:00:00"));
  coord.simulate_until(devs::kInfinity);
  EXPECT_TRUE(bench.readings->got.empty());
  ASSERT_EQ(bench.faults->got.size(), 1u);
  EXPECT_NE(bench.faults->got[0].second.reason.find("missing.csv"), std::string::npos);
  EXPECT_EQ(bench.sensor->phase(), "passive");
}

TEST(SensorTransition, ReactivationDoesNotRepeatReadings) {
  SensorBench bench({{at("2010-06-01 09:00:00"), {{true, "d", three_samples()}}},
                     {at("2010-06-01 10:00:30"), {{false, {}, nullptr}}},
                     {at("2010-06-01 10:00:30"), {}},
                     {at("2010-06-01 10:01:00"), {{true, "d", three_samples()}}}});
  devs::Coordinator coord(bench, options_at("2010-06-01 00:00:00"));
  coord.simulate_until(devs::kInfinity);
  ASSERT_EQ(bench.readings->got.size(), 3u);
  EXPECT_EQ(bench.readings->got[1].second.at, at("2010-06-01 10:01:00"));
}

// ---------------------------------------------------------------- fog

FarmLayout layout_of(const std::string& farm, int n) {
  FarmLayout l{farm, {}};
  for (int i = 0; i < n; ++i) {
    SensorConfig s;
    s.id = fmt::format("S{:02}", i + 1);
    s.farm = farm;
    s.lat = 21.3 + 0.0005 * i;
    s.lon = -158.1 + 0.0003 * (i % 5);
    l.sensors.push_back(s);
  }
  return l;
}

std::vector<SensorReading> bag_at(const FarmLayout& l, Timestamp t, double v) {
  std::vector<SensorReading> bag;
  for (const auto& s : l.sensors) bag.push_back({l.farm, s.id, t, v});
  return bag;
}

struct FogBench : devs::Coupled {
  FogBench(const FarmLayout& layout, const fs::path& store,
           std::vector<std::pair<Timestamp, std::vector<SensorReading>>> readings,
           std::vector<std::pair<Timestamp, std::vector<Command>>> commands = {})
      : devs::Coupled("bench") {
    auto& r = add<Emitter<SensorReading>>("readings", std::move(readings));
    auto& c = add<Emitter<Command>>("commands", std::move(commands));
    fog = &add<Fog>(layout, FogOptions{store, {}});
    packets = &add<Sink<DailyPacket>>("packets");
    jobs = &add<Sink<PredictionJob>>("jobs");
    ctl = &add<Sink<SensorControl>>("ctl");
    couple(r.out, fog->in_reading);
    couple(c.out, fog->in_cmd);
    couple(fog->out_packet, packets->in);
    couple(fog->out_prediction_job, jobs->in);
    couple(fog->out_ctl, ctl->in);
  }
  Fog* fog;
  Sink<DailyPacket>* packets;
  Sink<PredictionJob>* jobs;
  Sink<SensorControl>* ctl;
};

TEST(FogRoute, ReadingsWaitForTheDayBoundary) {
  const auto dir = scratch("fog_day");
  const auto layout = layout_of("Oahu", 17);
  FogBench bench(layout, dir, {{at("2010-06-01 12:00:00"), bag_at(layout, at("2010-06-01 12:00:00"), 500.0)}});
  devs::Coordinator coord(bench, options_at("2010-06-01 00:00:00"));
  coord.simulate_until(coord.next_time());
  EXPECT_EQ(bench.fog->readings(), 17u);
  EXPECT_TRUE(bench.packets->got.empty());
  coord.simulate_until(devs::kInfinity);
  coord.exit();
  ASSERT_EQ(bench.packets->got.size(), 1u);
  EXPECT_EQ(bench.packets->got[0].first, at("2010-06-02 00:00:00"));
  EXPECT_EQ(bench.packets->got[0].second.readings.size(), 17u);
  Datastore check(dir);
  EXPECT_EQ(check.read_raw("Oahu", parse_date("2010-06-01"), parse_date("2010-06-01")).size(), 17u);
}

TEST(FogRoute, FullDayAtOneSecondIsOnePacket) {
  const auto dir = scratch("fog_full");
  const auto layout = layout_of("Oahu", 17);
  std::vector<std::pair<Timestamp, std::vector<SensorReading>>> plan;
  const Timestamp day = at("2010-06-01 00:00:00");
  for (int s = 0; s < 86'400; ++s) {
    const Timestamp t = day + std::chrono::seconds(s);
    plan.emplace_back(t, bag_at(layout, t, s % 1000));
  }
  FogBench bench(layout, dir, std::move(plan));
  devs::Coordinator coord(bench, options_at("2010-06-01 00:00:00"));
  coord.simulate_until(devs::kInfinity);
  coord.exit();
  ASSERT_EQ(bench.packets->got.size(), 1u);
  EXPECT_EQ(bench.packets->got[0].second.readings.size(), 86'400u * 17u);
  EXPECT_EQ(bench.packets->got[0].second.day, parse_date("2010-06-01"));
}

TEST(FogRoute, OtherFarmsCommandsAreIgnored) {
  const auto dir = scratch("fog_addr");
  const auto cmds = parse_simulation_file(std::string(kHeader) +
                                          "2010-06-01 01:00:00;CMD_RUN_PREDICTION;Oahu;2010-06-01;1;raw;estimated\n"
                                          "2010-06-01 01:00:00;CMD_PASSIVATE_SENSORS;Oahu\n");
  FogBench bench(layout_of("Almeria", 3), dir, {}, {{cmds[0].at, cmds}});
  devs::Coordinator coord(bench, options_at("2010-06-01 00:00:00"));
  coord.simulate_until(devs::kInfinity);
  EXPECT_TRUE(bench.jobs->got.empty());
  EXPECT_TRUE(bench.ctl->got.empty());
  EXPECT_EQ(bench.fog->sigma(), devs::kInfinity);
  EXPECT_EQ(bench.fog->ta(), devs::kInfinity);
}

TEST(FogRoute, PredictionWithoutModelIsSkipped) {
  const auto dir = scratch("fog_nomodel");
  const auto cmds = parse_simulation_file(std::string(kHeader) +
                                          "2010-06-01 01:00:00;CMD_RUN_PREDICTION;Almeria;2010-06-01;1;raw;estimated\n");
  FogBench bench(layout_of("Almeria", 3), dir, {}, {{cmds[0].at, cmds}});
  devs::Coordinator coord(bench, options_at("2010-06-01 00:00:00"));
  coord.simulate_until(devs::kInfinity);
  EXPECT_TRUE(bench.jobs->got.empty());
}

// ---------------------------------------------------------------- cloud

gridcast::ModelConfig tiny_model() {
  gridcast::ModelConfig m;
  m.height = m.width = 4;
  m.filters = 2;
  return m;
}

struct CloudBench : devs::Coupled {
  CloudBench(std::vector<FarmLayout> layouts, CloudOptions options,
             std::vector<std::pair<Timestamp, std::vector<DailyPacket>>> packets,
             std::vector<std::pair<Timestamp, std::vector<ErrorReport>>> errors,
             std::vector<std::pair<Timestamp, std::vector<Command>>> commands = {})
      : devs::Coupled("bench") {
    auto& p = add<Emitter<DailyPacket>>("packets", std::move(packets));
    auto& e = add<Emitter<ErrorReport>>("errors", std::move(errors));
    auto& c = add<Emitter<Command>>("commands", std::move(commands));
    cloud = &add<Cloud>("cloud", std::move(layouts), std::move(options));
    models = &add<Sink<ModelUpdate>>("models");
    couple(p.out, cloud->in_packet);
    couple(e.out, cloud->in_error);
    couple(c.out, cloud->in_cmd);
    couple(cloud->out_model, models->in);
  }
  Cloud* cloud;
  Sink<ModelUpdate>* models;
};

SynthResult one_day(const std::string& farm, int sensors, std::uint64_t seed = 3) {
  FarmSpec spec = almeria_spec();
  spec.farm = farm;
  spec.sensors = sensors;
  return synth_generate(spec, parse_date("2010-06-01"), parse_date("2010-06-01"), seed);
}

DailyPacket packet_of(const SynthResult& s) {
  DailyPacket p{s.layout.farm, parse_date("2010-06-01"), {}};
  for (const auto& [id, series] : s.data.series) {
    for (std::size_t i = 0; i < series.size(); ++i) p.readings.push_back({s.layout.farm, id, series.at[i], series.ghi[i]});
  }
  std::stable_sort(p.readings.begin(), p.readings.end(), [](const auto& a, const auto& b) { return a.at < b.at; });
  return p;
}

TEST(CloudIngest, PacketGrowsRawTable) {
  const auto dir = scratch("cloud_packet");
  const auto synth = one_day("Almeria", 4);
  const auto packet = packet_of(synth);
  CloudOptions o;
  o.store = dir;
  CloudBench bench({synth.layout}, o, {{at("2010-06-02 00:00:00"), {packet}}}, {});
  devs::Coordinator coord(bench, options_at("2010-06-01 00:00:00"));
  coord.simulate_until(devs::kInfinity);
  coord.exit();
  EXPECT_EQ(bench.cloud->raw_rows(), packet.readings.size());
  Datastore check(dir);
  EXPECT_EQ(check.read_raw("Almeria", parse_date("2010-06-01"), parse_date("2010-06-01")).size(),
            packet.readings.size());
}

TEST(CloudIngest, ThresholdCrossingTrainsExactlyOnce) {
  const auto dir = scratch("cloud_threshold");
  const auto synth = one_day("Almeria", 4);
  CloudOptions o;
  o.store = dir;
  o.model = tiny_model();
  const double limit = o.retrain_threshold;
  const Date day = parse_date("2010-06-01");
  CloudBench bench({synth.layout}, o, {{at("2010-06-02 00:00:00"), {packet_of(synth)}}},
                   {{at("2010-06-02 01:00:00"), {{"Almeria", day, limit, 100}}},
                    {at("2010-06-02 02:00:00"), {{"Almeria", day, limit + 1, 100}}},
                    {at("2010-06-02 03:00:00"), {{"Almeria", day, std::nullopt, 0}}}});
  devs::Coordinator coord(bench, options_at("2010-06-01 00:00:00"));
  coord.simulate_until(devs::kInfinity);
  coord.exit();
  ASSERT_EQ(bench.cloud->trainings().size(), 1u);
  const auto& t = bench.cloud->trainings()[0];
  EXPECT_TRUE(t.self_triggered);
  EXPECT_TRUE(t.ok);
  EXPECT_EQ(t.start, day);
  ASSERT_EQ(bench.models->got.size(), 1u);
  EXPECT_EQ(bench.models->got[0].first, at("2010-06-02 02:00:00"));
  Datastore check(dir);
  EXPECT_EQ(check.checkpoints("Almeria"), std::vector<std::string>{t.id});
}

TEST(CloudIngest, LocalTrainWritesCheckpoint) {
  const auto dir = scratch("cloud_local");
  const auto synth = one_day("Almeria", 4);
  CloudOptions o;
  o.store = dir;
  o.model = tiny_model();
  const auto cmd = parse_simulation_file(std::string(kHeader) +
                                         "2010-06-02 00:30:00;CMD_TRAIN_MODEL;local;Almeria;2010-06-01;2010-06-01;2\n");
  CloudBench bench({synth.layout}, o, {{at("2010-06-02 00:00:00"), {packet_of(synth)}}}, {}, {{cmd[0].at, cmd}});
  devs::Coordinator coord(bench, options_at("2010-06-01 00:00:00"));
  coord.simulate_until(devs::kInfinity);
  coord.exit();
  ASSERT_EQ(bench.cloud->trainings().size(), 1u);
  const auto& t = bench.cloud->trainings()[0];
  EXPECT_FALSE(t.self_triggered);
  EXPECT_FALSE(t.fell_back);
  EXPECT_EQ(t.metrics.size(), 2u);
  Datastore check(dir);
  const auto bytes = check.read_checkpoint("Almeria", t.id);
  const auto model = gridcast::decode_checkpoint(bytes);
  EXPECT_EQ(model.config, o.model);
  ASSERT_EQ(bench.models->got.size(), 1u);
  EXPECT_EQ(bench.models->got[0].second.checkpoint, bytes);
}

TEST(CloudIngest, UnreachableEndpointFallsBackToLocal) {
  const auto dir = scratch("cloud_fallback");
  const auto synth = one_day("Almeria", 4);
  CloudOptions o;
  o.store = dir;
  o.model = tiny_model();
  o.backoff = std::chrono::milliseconds(1);
  o.client.connect_timeout = std::chrono::milliseconds(200);
  const auto cmd = parse_simulation_file(std::string(kHeader) +
                                         "2010-06-02 00:30:00;CMD_TRAIN_MODEL;127.0.0.1:1;Almeria;2010-06-01;2010-06-01;1\n");
  CloudBench bench({synth.layout}, o, {{at("2010-06-02 00:00:00"), {packet_of(synth)}}}, {}, {{cmd[0].at, cmd}});
  devs::Coordinator coord(bench, options_at("2010-06-01 00:00:00"));
  coord.simulate_until(devs::kInfinity);
  ASSERT_EQ(bench.cloud->trainings().size(), 1u);
  EXPECT_TRUE(bench.cloud->trainings()[0].fell_back);
  EXPECT_TRUE(bench.cloud->trainings()[0].ok);
  EXPECT_EQ(bench.models->got.size(), 1u);
}

// ---------------------------------------------------------------- world

struct Scenario {
  fs::path root;
  std::vector<FarmLayout> layouts;
  std::vector<Command> commands;
};

// Two farms, two synthetic days each, with noisy quantized sensors.
Scenario scenario(const std::string& name, const std::string& body) {
  Scenario s;
  s.root = scratch(name);
  fs::create_directories(s.root / "store" / "datasets");
  for (const auto& [farm, n] : {std::pair{std::string("North"), 4}, std::pair{std::string("South"), 3}}) {
    FarmSpec spec = almeria_spec();
    spec.farm = farm;
    spec.sensors = n;
    SynthOptions so;
    so.spike_rate = 0.002;
    auto synth = synth_generate(spec, parse_date("2010-06-01"), parse_date("2010-06-02"), farm.size(), so);
    for (auto& c : synth.layout.sensors) {
      c.noise_sigma = 5.0;
      c.precision = 0.5;
      c.delay = 0.25;
    }
    save_dataset((s.root / "store" / "datasets" / (farm + ".csv")).string(), synth.data);
    s.layouts.push_back(synth.layout);
  }
  s.commands = parse_simulation_file(std::string(kHeader) + body);
  return s;
}

struct Outcome {
  devs::SimulationStats stats;
  std::uint64_t readings = 0;
  std::vector<TrainingRecord> trainings;
  std::uint64_t reports = 0;
  std::map<std::string, std::uint64_t> emitted, outlier_jobs, inference_jobs;
};

Outcome run(const Scenario& s, const fs::path& store, std::size_t workers, std::uint64_t seed = 42) {
  WorldOptions o;
  o.store = store;
  o.dataset_dirs = {s.root / "store" / "datasets"};
  o.cloud.model = tiny_model();
  o.cloud.retrain_threshold = 1e9;
  fs::remove_all(store);
  World world(s.commands, s.layouts, o);
  devs::CoordinatorOptions co;
  co.seed = seed;
  co.epoch = Timestamp{day_of(s.commands.front().at)};
  co.workers = workers;
  devs::Coordinator coord(world, co);
  Outcome out;
  out.stats = coord.simulate_until(devs::kInfinity);
  coord.exit();
  out.readings = world.readings();
  out.trainings = world.cloud().trainings();
  out.reports = world.cloud().reports();
  for (const auto* f : world.farms()) {
    for (const auto* sensor : f->sensors()) out.emitted[f->name()] += sensor->emitted();
    out.outlier_jobs[f->name()] = f->outlier_service().jobs();
    out.inference_jobs[f->name()] = f->inference_service().jobs();
  }
  return out;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), root).string()] = ss.str();
  }
  return files;
}

const char* kDataScript =
    "2010-06-01 00:00:00;ACTIVATE\n"
    "2010-06-01 00:00:00;CMD_ACTIVATE_SENSORS;North;North.csv\n"
    "2010-06-01 00:00:00;CMD_ACTIVATE_SENSORS;South;South.csv\n"
    "2010-06-02 12:00:00;CMD_PASSIVATE_SENSORS;South\n"
    "2010-06-03 00:00:00;PASSIVATE\n";

TEST(World, ConservationAcrossFogAndCloud) {
  const auto s = scenario("conservation", kDataScript);
  const auto store = s.root / "out";
  const auto out = run(s, store, 1);
  Datastore fog(store / "fog"), cloud(store / "cloud");
  for (const auto& l : s.layouts) {
    const auto a = fog.read_raw(l.farm, parse_date("2010-06-01"), parse_date("2010-06-02"));
    const auto b = cloud.read_raw(l.farm, parse_date("2010-06-01"), parse_date("2010-06-02"));
    EXPECT_EQ(a.size(), out.emitted.at(l.farm)) << l.farm;
    EXPECT_EQ(b.size(), out.emitted.at(l.farm)) << l.farm;
    std::set<std::pair<std::string, Timestamp>> keys;
    for (const auto& r : a) {
      EXPECT_EQ(r.quality, Quality::measured);
      EXPECT_TRUE(keys.insert({r.sensor, r.at}).second) << "duplicate in fog table";
    }
    for (const auto& r : b) EXPECT_EQ(keys.count({r.sensor, r.at}), 1u);
    if (l.farm == "South") {
      for (const auto& r : a) EXPECT_LE(r.at, at("2010-06-02 12:00:00"));
    } else {
      EXPECT_EQ(a.size(), 2u * 1440u * l.sensors.size());
    }
  }
  EXPECT_EQ(out.readings, out.emitted.at("North") + out.emitted.at("South"));
}

TEST(World, SameSeedIsByteIdentical) {
  const auto s = scenario("determinism", kDataScript);
  run(s, s.root / "a", 1);
  run(s, s.root / "b", 1);
  run(s, s.root / "c", 2);
  const auto a = tree(s.root / "a");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, tree(s.root / "b"));
  EXPECT_EQ(a, tree(s.root / "c"));
  run(s, s.root / "d", 1, 43);
  EXPECT_NE(a, tree(s.root / "d"));
}

TEST(World, EveryCommandReachesItsTarget) {
  const auto s = scenario("all_commands",
                          "2010-06-01 00:00:00;ACTIVATE\n"
                          "2010-06-01 00:00:00;CMD_ACTIVATE_SENSORS;North;North.csv\n"
                          "2010-06-01 00:00:00;CMD_ACTIVATE_SENSORS;South;South.csv\n"
                          "2010-06-01 20:00:00;CMD_FIX_OUTLIERS;North;S1;2010-06-01;2010-06-01;linear;0.99\n"
                          "2010-06-02 00:30:00;CMD_TRAIN_MODEL;local;North;2010-06-01;2010-06-01;1\n"
                          "2010-06-02 00:30:00;CMD_PASSIVATE_SENSORS;South\n"
                          "2010-06-03 00:00:00;CMD_PASSIVATE_SENSORS;North\n"
                          "2010-06-03 00:10:00;CMD_RUN_PREDICTION;North;2010-06-02;1,61;estimated;forecast\n"
                          "2010-06-03 00:20:00;CMD_GENERATE_REPORTS;North;2010-06-01;2010-06-02;reports\n"
                          "2010-06-03 01:00:00;PASSIVATE\n");
  const auto store = s.root / "out";
  const auto out = run(s, store, 1);
  EXPECT_EQ(out.outlier_jobs.at("North"), 1u);
  EXPECT_EQ(out.outlier_jobs.at("South"), 0u);
  EXPECT_EQ(out.inference_jobs.at("North"), 1u);
  EXPECT_EQ(out.inference_jobs.at("South"), 0u);
  ASSERT_EQ(out.trainings.size(), 1u);
  EXPECT_EQ(out.reports, 1u);

  Datastore fog(store / "fog"), cloud(store / "cloud");
  EXPECT_EQ(fog.checkpoints("North").size(), 1u);
  const auto forecast = fog.read_estimated("North", parse_date("2010-06-02"), parse_date("2010-06-02"), "forecast");
  EXPECT_FALSE(forecast.empty());
  std::set<int> horizons;
  for (const auto& r : forecast) {
    EXPECT_EQ(r.quality, Quality::predicted);
    EXPECT_EQ(day_of(r.at), parse_date("2010-06-02"));
    horizons.insert(r.horizon_min);
  }
  EXPECT_EQ(horizons, (std::set<int>{1, 61}));
  EXPECT_EQ(cloud.read_estimated("North", parse_date("2010-06-02"), parse_date("2010-06-02"), "forecast").size(),
            forecast.size());
  EXPECT_TRUE(fs::exists(store / "reports" / "North" / "fog_report.html"));
  EXPECT_TRUE(fs::exists(store / "reports" / "cloud_report.html"));
  EXPECT_TRUE(fs::exists(store / "fog" / "North" / "reports" / "outliers" / "S1_2010-06-01_2010-06-01.csv"));
  EXPECT_TRUE(fs::exists(store / "cloud" / "North" / "reports" / "outliers" / "S1_2010-06-01_2010-06-01.csv"));
  for (const auto& r : fog.read_estimated("North", parse_date("2010-06-01"), parse_date("2010-06-01"))) {
    EXPECT_EQ(r.quality, Quality::repaired);
  }
}

}  // namespace

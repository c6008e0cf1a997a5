#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "avmtbf/errors.hpp"
#include "avmtbf/situations.hpp"
#include "avmtbf/units.hpp"

using namespace avmtbf;
using namespace avmtbf::situations;
using units::kmh_to_ms;

namespace {

TrackFrame frame(std::int64_t f, std::int64_t id, int lane, double x, double v, double a,
                 std::int64_t preceding, double length = 4.0) {
  return {f, id, lane, x, v, a, preceding, length};
}

// Single in-partition range [80,100) km/h; every lead drives at 21 m/s
// (75.6 km/h, below the partition) or 28.5 m/s (102.6 km/h, above it), so
// lead rows never pollute the ego exposure counts.
Recording planted_recording() {
  Recording rec;
  rec.name = "planted";
  std::int64_t f = 0;
  auto two = [&](double ego_v, double lead_v, double lead_a, double gap, int lane = 1,
                 std::int64_t lead_id = 2) {
    rec.frames.push_back(frame(f, 1, 1, 0.0, ego_v, 0.0, lead_id));
    rec.frames.push_back(frame(f, lead_id, lane, gap + 4.0, lead_v, lead_a, 0));
    ++f;
  };
  // 8 decelerating leads, huge gap and one faster lead: counted regardless
  for (int i = 0; i < 6; ++i) two(25.0, 21.0, -1.0, 500.0);
  for (int i = 0; i < 2; ++i) two(25.0, 28.5, -1.0, 500.0);
  // 4 accelerating close leads (gap 10: ttc ~1.74 s)
  for (int i = 0; i < 4; ++i) two(25.0, 21.0, 1.0, 10.0);
  // 6 constant close leads; one of them at the exact 5 s ttc boundary (gap 45)
  for (int i = 0; i < 5; ++i) two(25.0, 21.0, 0.0, 10.0);
  two(25.0, 21.0, 0.0, 45.0);
  // 5 constant far leads (gap 1000)
  for (int i = 0; i < 5; ++i) two(25.0, 21.0, 0.0, 1000.0);
  // 3 constant faster leads at gap 5: close by ttc but the slower gate excludes them
  for (int i = 0; i < 3; ++i) two(25.0, 28.5, 0.0, 5.0);
  // 4 frames without a lead
  for (int i = 0; i < 4; ++i) {
    rec.frames.push_back(frame(f++, 1, 1, 0.0, 25.0, 0.0, 0));
  }
  // 2 dangling lead references
  for (int i = 0; i < 2; ++i) {
    rec.frames.push_back(frame(f++, 1, 1, 0.0, 25.0, 0.0, 99));
  }
  // 1 lead in another lane
  two(25.0, 21.0, 0.0, 10.0, 2);
  // 3 ego frames out of the partition
  for (int i = 0; i < 3; ++i) {
    rec.frames.push_back(frame(f++, 1, 1, 0.0, 30.0, 0.0, 0));
  }
  return rec;
}

const SpeedRangePartition kSingleRange = SpeedRangePartition::from_kmh({80.0, 100.0});

}  // namespace

TEST_CASE("driving mode classification") {
  CHECK(classify_mode(0.5, 0.1) == DrivingMode::Accelerating);
  CHECK(classify_mode(0.0, 0.1) == DrivingMode::Constant);
  CHECK(classify_mode(-0.05, 0.1) == DrivingMode::Constant);
  CHECK(classify_mode(-0.5, 0.1) == DrivingMode::Decelerating);
  CHECK(classify_mode(0.1, 0.1) == DrivingMode::Constant);  // dead band is inclusive
  CHECK_THROWS_AS(classify_mode(0.0, 0.0), ValidationError);
}

TEST_CASE("situation extraction on a planted recording") {
  auto table = extract_situation_table({planted_recording()}, kSingleRange);

  // 33 in-range ego frames: 8 decel + 4 accel + 6 close + 5 far + 3 faster
  // + 4 no-lead + 2 dangling + 1 other-lane
  CHECK(table.retained_frames == 33);
  // 3 fast ego frames + 27 out-of-partition lead rows
  CHECK(table.discarded_frames == 30);
  CHECK(table.dangling_lead_refs == 2);
  CHECK(table.raw_gap_frames == 0);

  const RangeCounts& c = table.counts[0];
  CHECK(c.frames == 33);
  CHECK(c.frames_with_lead == 26);
  CHECK(c.lead_decelerating == 8);
  CHECK(c.lead_accelerating == 4);
  CHECK(c.lead_constant == 14);
  CHECK(c.lead_accelerating_close == 4);
  CHECK(c.lead_constant_close == 6);  // includes the exact-boundary ttc = 5 s frame

  CHECK(table.p_i[0] == doctest::Approx(1.0));
  CHECK(table.p_d[0] == doctest::Approx(8.0 / 33.0));
  CHECK(table.p_a_close[0] == doctest::Approx(4.0 / 33.0));
  CHECK(table.p_c_close[0] == doctest::Approx(6.0 / 33.0));
  CHECK(table.p_s[0] == doctest::Approx(18.0 / 33.0));

  SUBCASE("mode cells partition the frames with a lead") {
    CHECK(c.lead_decelerating + c.lead_accelerating + c.lead_constant == c.frames_with_lead);
  }
  SUBCASE("situation probability is the sum of its cells") {
    CHECK(table.p_s[0] ==
          doctest::Approx(table.p_d[0] + table.p_a_close[0] + table.p_c_close[0]).epsilon(1e-15));
  }
  SUBCASE("ttc boundary is inclusive") {
    // push the boundary frame just past 45 m and the cell loses one count
    Recording rec = planted_recording();
    for (auto& fr : rec.frames) {
      if (fr.position_m == 49.0) fr.position_m = 49.01;
    }
    auto shifted = extract_situation_table({rec}, kSingleRange);
    CHECK(shifted.counts[0].lead_constant_close == 5);
  }
}

TEST_CASE("extraction edge cases") {
  SUBCASE("every frame a decelerating lead gives p_s 1") {
    Recording rec;
    rec.name = "alldec";
    for (std::int64_t f = 0; f < 10; ++f) {
      rec.frames.push_back(frame(f, 1, 1, 0.0, 25.0, 0.0, 2));
      rec.frames.push_back(frame(f, 2, 1, 30.0, 21.0, -2.0, 0));
    }
    auto table = extract_situation_table({rec}, kSingleRange);
    CHECK(table.p_s[0] == doctest::Approx(1.0));
    CHECK(table.p_d[0] == doctest::Approx(1.0));
  }
  SUBCASE("missing lead length falls back to raw positions") {
    Recording rec;
    rec.frames.push_back(frame(0, 1, 1, 0.0, 25.0, 0.0, 2));
    rec.frames.push_back(frame(0, 2, 1, 10.0, 21.0, 0.0, 0, 0.0));
    auto table = extract_situation_table({rec}, kSingleRange);
    CHECK(table.raw_gap_frames == 1);
    CHECK(table.counts[0].lead_constant_close == 1);
  }
  SUBCASE("all frames out of range") {
    Recording rec;
    rec.frames.push_back(frame(0, 1, 1, 0.0, 5.0, 0.0, 0));
    CHECK_THROWS_AS(extract_situation_table({rec}, kSingleRange), DataError);
  }
  SUBCASE("no recordings") {
    CHECK_THROWS_AS(extract_situation_table({}, kSingleRange), DataError);
  }
  SUBCASE("probabilities stay in bounds and p_i sums to one") {
    std::mt19937 gen(41);
    std::uniform_real_distribution<double> speed(kmh_to_ms(60.0), kmh_to_ms(200.0));
    std::uniform_real_distribution<double> gap(1.0, 200.0);
    std::uniform_real_distribution<double> accel(-3.0, 3.0);
    Recording rec;
    for (std::int64_t f = 0; f < 2000; ++f) {
      rec.frames.push_back(frame(f, 1, 1, 0.0, speed(gen), accel(gen), 2));
      rec.frames.push_back(frame(f, 2, 1, gap(gen) + 4.0, speed(gen), accel(gen), 0));
    }
    auto partition = SpeedRangePartition::from_kmh({80.0, 100.0, 130.0, 180.0});
    auto table = extract_situation_table({rec}, partition);
    double p_i_sum = 0.0;
    for (std::size_t i = 0; i < partition.size(); ++i) {
      for (double p : {table.p_i[i], table.p_d[i], table.p_a_close[i], table.p_c_close[i],
                       table.p_s[i], table.p_follower_close[i]}) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
      }
      CHECK(table.p_s[i] == doctest::Approx(table.p_d[i] + table.p_a_close[i] +
                                            table.p_c_close[i]).epsilon(1e-12));
      p_i_sum += table.p_i[i];
    }
    CHECK(p_i_sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("recording order does not change the table") {
  Recording a = planted_recording();
  Recording b;
  b.name = "other";
  for (std::int64_t f = 0; f < 7; ++f) {
    b.frames.push_back(frame(f, 1, 1, 0.0, 26.0, 0.0, 2));
    b.frames.push_back(frame(f, 2, 1, 20.0, 21.0, 0.0, 0));
  }
  auto t1 = extract_situation_table({a, b}, kSingleRange);
  auto t2 = extract_situation_table({b, a}, kSingleRange);
  CHECK(t1.retained_frames == t2.retained_frames);
  CHECK(t1.counts[0].lead_constant_close == t2.counts[0].lead_constant_close);
  CHECK(t1.p_s[0] == t2.p_s[0]);
}

TEST_CASE("speed distribution") {
  SUBCASE("single-speed stream is one-hot") {
    Recording rec;
    for (std::int64_t f = 0; f < 10; ++f) {
      rec.frames.push_back(frame(f, 1, 1, 0.0, kmh_to_ms(110.0), 0.0, 0));
    }
    auto partition = SpeedRangePartition::from_kmh({80.0, 100.0, 130.0, 180.0});
    auto p = speed_distribution({rec}, partition);
    CHECK(p[0] == 0.0);
    CHECK(p[1] == 1.0);
    CHECK(p[2] == 0.0);
  }
  SUBCASE("uniform speeds split by range width") {
    Recording rec;
    std::int64_t f = 0;
    for (int i = 0; i < 1000; ++i) {
      const double kmh = 80.0 + (i + 0.5) * 0.1;  // even grid over [80, 180)
      rec.frames.push_back(frame(f++, 1, 1, 0.0, kmh_to_ms(kmh), 0.0, 0));
    }
    auto partition = SpeedRangePartition::from_kmh({80.0, 100.0, 130.0, 180.0});
    auto p = speed_distribution({rec}, partition);
    CHECK(p[0] == doctest::Approx(0.2).epsilon(1e-9));
    CHECK(p[1] == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(p[2] == doctest::Approx(0.5).epsilon(1e-9));
  }
  SUBCASE("all frames out of range") {
    Recording rec;
    rec.frames.push_back(frame(0, 1, 1, 0.0, 1.0, 0.0, 0));
    CHECK_THROWS_AS(speed_distribution({rec}, kSingleRange), DataError);
  }
}

TEST_CASE("rear follower probability") {
  SUBCASE("no followers anywhere") {
    auto p = rear_follower_probability({planted_recording()}, kSingleRange);
    CHECK(p[0] == 0.0);
  }
  SUBCASE("convoy with the follower at the inclusive ttc boundary") {
    // ego at 25 m/s (90 km/h) in range; follower at 26 m/s (93.6 km/h) is
    // outside the [80,93) partition, so only ego frames count. Follower ttc:
    // t^2 + t - 25 = 0 -> 4.52 s <= 5 s.
    const SpeedRangePartition narrow = SpeedRangePartition::from_kmh({80.0, 93.0});
    Recording rec;
    for (std::int64_t f = 0; f < 12; ++f) {
      rec.frames.push_back(frame(f, 1, 1, 29.0, 25.0, 0.0, 0));
      rec.frames.push_back(frame(f, 2, 1, 0.0, 26.0, 0.0, 1));
    }
    auto p = rear_follower_probability({rec}, narrow);
    CHECK(p[0] == doctest::Approx(1.0));

    // equal speeds at gap 25 m: ttc is exactly 5 s and still counts
    Recording exact;
    for (std::int64_t f = 0; f < 12; ++f) {
      exact.frames.push_back(frame(f, 1, 1, 29.0, 25.0, 0.0, 0));
      exact.frames.push_back(frame(f, 2, 1, 0.0, 25.0, 0.0, 1));
    }
    auto both_in_range = rear_follower_probability({exact}, kSingleRange);
    CHECK(both_in_range[0] == doctest::Approx(0.5));  // follower has no follower
  }
}

TEST_CASE("convergence report") {
  auto single_speed_recording = [](const std::string& name, double speed_ms, int n) {
    Recording rec;
    rec.name = name;
    for (std::int64_t f = 0; f < n; ++f) {
      rec.frames.push_back(frame(f, 1, 1, 0.0, speed_ms, 0.0, 0));
    }
    return rec;
  };

  SUBCASE("identical recordings show no shift") {
    auto rec = single_speed_recording("same", 25.0, 50);
    auto rows = convergence_report({rec, rec, rec}, kSingleRange);
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
      CHECK(row.ks_cumulative == 0.0);
      CHECK(row.ks_increment == 0.0);
    }
  }
  SUBCASE("disjoint speeds produce a full-shift increment") {
    auto a = single_speed_recording("a", 23.0, 50);
    auto b = single_speed_recording("b", 27.0, 50);
    auto rows = convergence_report({a, b}, kSingleRange);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].ks_increment == doctest::Approx(1.0));
    CHECK(rows[0].ks_cumulative == doctest::Approx(0.5));
  }
  SUBCASE("cumulative shift decays on random splits of one population") {
    std::mt19937 gen(59);
    std::normal_distribution<double> speed(25.0, 1.0);
    std::vector<Recording> recordings;
    for (int r = 0; r < 10; ++r) {
      Recording rec;
      rec.name = "part" + std::to_string(r);
      for (std::int64_t f = 0; f < 400; ++f) {
        rec.frames.push_back(frame(f, 1, 1, 0.0, std::clamp(speed(gen), 22.3, 27.7), 0.0, 0));
      }
      recordings.push_back(std::move(rec));
    }
    auto rows = convergence_report(recordings, kSingleRange);
    const double early = (rows[0].ks_cumulative + rows[1].ks_cumulative) / 2.0;
    const double late = (rows[rows.size() - 1].ks_cumulative +
                         rows[rows.size() - 2].ks_cumulative) / 2.0;
    CHECK(late < early);
  }
  SUBCASE("one recording is not enough") {
    auto rec = single_speed_recording("only", 25.0, 10);
    CHECK_THROWS_AS(convergence_report({rec}, kSingleRange), DataError);
  }
}

TEST_CASE("ks statistic") {
  CHECK(ks_statistic({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
  CHECK(ks_statistic({1.0, 2.0}, {5.0, 6.0}) == 1.0);
  CHECK(ks_statistic({1.0, 1.0, 2.0, 2.0}, {1.0, 2.0}) == 0.0);
  // half the mass shifted
  CHECK(ks_statistic({1.0, 2.0, 3.0, 4.0}, {1.0, 2.0, 30.0, 40.0}) == doctest::Approx(0.5));
}

TEST_CASE("track CSV ingestion") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "avmtbf_tracks_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name);
    out << text;
  };
  const std::string header = "frame,id,laneId,x,xVelocity,xAcceleration,precedingId,width\n";
  const std::string meta = "id,frameRate\n1,25\n";

  SUBCASE("directory of recordings, frame order preserved") {
    write("01_tracks.csv", header + "0,1,1,0.0,25.0,0.0,2,4.2\n0,2,1,30.0,24.0,-1.0,0,4.0\n");
    write("01_recordingMeta.csv", meta);
    write("02_tracks.csv", header + "0,7,2,1.0,26.0,0.5,0,4.0\n1,7,2,2.0,26.5,0.5,0,4.0\n");
    write("02_recordingMeta.csv", meta);
    auto recordings = ingest_tracks(dir);
    REQUIRE(recordings.size() == 2);
    CHECK(recordings[0].name == "01_tracks.csv");
    CHECK(recordings[0].frame_rate_hz == 25.0);
    REQUIRE(recordings[0].frames.size() == 2);
    CHECK(recordings[0].frames[0].vehicle_id == 1);
    CHECK(recordings[0].frames[0].preceding_id == 2);
    CHECK(recordings[0].frames[0].length_m == doctest::Approx(4.2));
    CHECK(recordings[1].frames[1].frame_index == 1);
  }
  SUBCASE("negative driving direction is normalized") {
    write("03_tracks.csv", header + "0,1,5,100.0,-25.0,1.5,0,4.0\n");
    write("03_recordingMeta.csv", meta);
    auto recordings = ingest_tracks(dir / "03_tracks.csv");
    REQUIRE(recordings.size() == 1);
    CHECK(recordings[0].frames[0].speed_ms == doctest::Approx(25.0));
    // positive x-acceleration against negative velocity is a deceleration
    CHECK(recordings[0].frames[0].accel_ms2 == doctest::Approx(-1.5));
  }
  SUBCASE("missing column is named") {
    write("04_tracks.csv", "frame,id,laneId,x,xVelocity,xAcceleration,width\n0,1,1,0,25,0,4\n");
    write("04_recordingMeta.csv", meta);
    CHECK_THROWS_WITH_AS(ingest_tracks(dir / "04_tracks.csv"),
                         doctest::Contains("precedingId"), DataError);
  }
  SUBCASE("non-numeric cell reports row and column") {
    write("05_tracks.csv", header + "0,1,1,0.0,fast,0.0,0,4.0\n");
    write("05_recordingMeta.csv", meta);
    try {
      ingest_tracks(dir / "05_tracks.csv");
      FAIL("expected DataError");
    } catch (const DataError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("row 1") != std::string::npos);
      CHECK(msg.find("xVelocity") != std::string::npos);
    }
  }
  SUBCASE("empty file") {
    write("06_tracks.csv", "");
    write("06_recordingMeta.csv", meta);
    CHECK_THROWS_WITH_AS(ingest_tracks(dir / "06_tracks.csv"), doctest::Contains("empty"),
                         DataError);
  }
  SUBCASE("missing metadata sibling") {
    write("07_tracks.csv", header + "0,1,1,0.0,25.0,0.0,0,4.0\n");
    CHECK_THROWS_AS(ingest_tracks(dir / "07_tracks.csv"), DataError);
  }
  SUBCASE("empty directory") {
    const fs::path empty = dir / "empty";
    fs::create_directories(empty);
    CHECK_THROWS_WITH_AS(ingest_tracks(empty), doctest::Contains("no recordings"), DataError);
  }

  fs::remove_all(dir);
}

TEST_CASE("planted frequencies are recovered within the 99% binomial CI") {
  // random fixture: every frame draws the lead constellation independently
  const double plant_d = 0.05, plant_a = 0.01, plant_c = 0.20;
  std::mt19937 gen(71);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Recording rec;
  const int n = 20000;
  for (std::int64_t f = 0; f < n; ++f) {
    const double roll = u(gen);
    rec.frames.push_back(frame(f, 1, 1, 0.0, 25.0, 0.0, roll < plant_d + plant_a + plant_c ? 2 : 0));
    if (roll < plant_d) {
      rec.frames.push_back(frame(f, 2, 1, 200.0, 21.0, -1.0, 0));
    } else if (roll < plant_d + plant_a) {
      rec.frames.push_back(frame(f, 2, 1, 14.0, 21.0, 1.0, 0));
    } else if (roll < plant_d + plant_a + plant_c) {
      rec.frames.push_back(frame(f, 2, 1, 14.0, 21.0, 0.0, 0));
    }
  }
  auto table = extract_situation_table({rec}, kSingleRange);
  auto check_ci = [&](double planted, double estimated) {
    const double half_width = 2.576 * std::sqrt(planted * (1.0 - planted) / n);
    CHECK(std::abs(estimated - planted) < half_width);
  };
  check_ci(plant_d, table.p_d[0]);
  check_ci(plant_a, table.p_a_close[0]);
  check_ci(plant_c, table.p_c_close[0]);
  check_ci(plant_d + plant_a + plant_c, table.p_s[0]);
}

TEST_CASE("reference decomposition arithmetic") {
  // the published per-range cells sum to the published totals
  CHECK(0.028 + 0.001 + 0.279 == doctest::Approx(0.308).epsilon(1e-12));
  CHECK(0.021 + 0.003 + 0.152 == doctest::Approx(0.176).epsilon(1e-12));
  CHECK(0.023 + 0.004 + 0.088 == doctest::Approx(0.115).epsilon(1e-12));
}

TEST_CASE("situation table JSON round-trip") {
  auto table = extract_situation_table({planted_recording()}, kSingleRange);
  auto doc = situation_table_to_json(table);
  auto back = situation_table_from_json(doc);
  CHECK(back.partition == table.partition);
  CHECK(back.p_s == table.p_s);
  CHECK(back.p_i == table.p_i);
  CHECK(back.p_follower_close == table.p_follower_close);
  CHECK(back.counts[0].frames == table.counts[0].frames);

  auto bad = doc;
  bad["schema"] = "avmtbf-situations/none";
  CHECK_THROWS_AS(situation_table_from_json(bad), ValidationError);
}

// SPDX-License-Identifier: Apache-2.0
//
// spiketrack: simulate, reconstruct, track, evaluate, collide, holes, bench.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "artifacts.hpp"
#include "csv.hpp"
#include "spiketrack.hpp"

#ifndef SPIKETRACK_VERSION
#define SPIKETRACK_VERSION "0.0.0"
#endif

namespace st = spiketrack;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using st::cli::num;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string config_path;
  std::string out_dir = ".";
  bool quiet = false;
};

struct Context {
  Globals g;
  st::KeyValueConfig cfg;
  st::cli::RunManifest manifest;
  std::unique_ptr<st::cli::ArtifactSet> artifacts;

  std::ostream& log() {
    static std::ostringstream sink;
    return g.quiet ? (sink.str(""), sink) : std::cerr;
  }

  void input(const std::string& p) { manifest.inputs.push_back(p); }
  void note(const std::string& k, const std::string& v) { manifest.config[k] = v; }
};

// ---------------------------------------------------------------------------
// Shared parsing

std::pair<std::uint16_t, std::uint16_t> parse_resolution(const std::string& s) {
  const auto x = s.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    const unsigned long w = std::stoul(s.substr(0, x));
    const unsigned long h = std::stoul(s.substr(x + 1));
    if (w == 0 || h == 0 || w > 65535 || h > 65535) throw std::out_of_range(s);
    return {std::uint16_t(w), std::uint16_t(h)};
  } catch (const std::exception&) {
    st::fail(st::ErrorKind::validation, "bad --resolution '" + s + "', expected WxH");
  }
}

struct SweepSpec {
  double lo, hi, step;
};

SweepSpec parse_sweep(const std::string& s) {
  std::vector<double> parts;
  std::stringstream in(s);
  std::string tok;
  try {
    while (std::getline(in, tok, ':')) parts.push_back(std::stod(tok));
  } catch (const std::exception&) {
    parts.clear();
  }
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0] || parts[0] < 0.0) {
    st::fail(st::ErrorKind::validation, "bad --sweep '" + s + "', expected lo:hi:step");
  }
  return {parts[0], parts[1], parts[2]};
}

st::TrackerConfig tracker_config(const st::KeyValueConfig& c) {
  st::TrackerConfig t;
  t.delta = c.get_double("delta", t.delta);
  t.gamma = c.get_double("gamma", t.gamma);
  t.assoc_radius = c.get_double("assoc_radius", t.assoc_radius);
  t.expected_markers = c.get_uint("expected_markers", t.expected_markers);
  t.min_blob_area = c.get_uint("min_blob_area", t.min_blob_area);
  t.success_radius = c.get_double("success_radius", t.success_radius);
  t.window_us = c.get_uint("window_us", t.window_us);
  st::validate(t);
  return t;
}

st::DenoiserConfig denoiser_config(const st::KeyValueConfig& c) {
  st::DenoiserConfig d;
  d.min_component_area = c.get_uint("min_component_area", d.min_component_area);
  d.closing_radius = c.get_uint("closing_radius", d.closing_radius);
  st::validate(d);
  return d;
}

st::EventStream load_stream(Context& ctx, const std::string& path) {
  ctx.input(path);
  return st::read_event_file(path);
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOpts {
  std::string scenario;
  std::string kind;
  std::optional<double> amplitude;
  std::string out = "stream.evt";
  std::string calib_out;
  std::string truth = "truth.csv";
  std::string resolution = "320x320";
  std::optional<double> noise_rate;
  std::optional<double> contrast;
};

int cmd_simulate(Context& ctx, const SimulateOpts& o) {
  st::KeyValueConfig sc = ctx.cfg;
  if (!o.scenario.empty()) {
    ctx.input(o.scenario);
    const auto scenario = st::KeyValueConfig::load(o.scenario);
    for (const auto& [k, v] : scenario.values()) sc.set(k, v);
  }
  const auto [w, h] = parse_resolution(o.resolution);
  st::sim::InteractionParams p;
  p.width = w;
  p.height = h;
  p.amplitude_px = o.amplitude ? *o.amplitude : sc.get_double("amplitude_px", p.amplitude_px);
  p.period_ms = sc.get_double("period_ms", p.period_ms);
  p.cycles = int(sc.get_uint("cycles", std::uint64_t(p.cycles)));
  p.settle_ms = sc.get_double("settle_ms", p.settle_ms);
  p.hysteresis.tau_ms = sc.get_double("tau_ms", p.hysteresis.tau_ms);
  p.hysteresis.residual_fraction = sc.get_double("residual_fraction", p.hysteresis.residual_fraction);
  p.hysteresis.residual_decay_ms = sc.get_double("residual_decay_ms", p.hysteresis.residual_decay_ms);
  if (sc.contains("direction_deg")) {
    p.direction_rad = sc.get_double("direction_deg", 0.0) * std::numbers::pi / 180.0;
  }
  const std::string kind_name = !o.kind.empty() ? o.kind : sc.get("kind").value_or("drag_release");
  const auto kind = st::sim::parse_interaction_kind(kind_name);
  const std::uint64_t seed = sc.get_uint("seed", ctx.g.seed);
  const double noise_rate = o.noise_rate ? *o.noise_rate : sc.get_double("noise_rate", 0.01);
  const double contrast =
      o.contrast ? *o.contrast : sc.get_double("contrast_threshold", st::kDefaultContrastThreshold);
  if (noise_rate < 0.0) st::fail(st::ErrorKind::validation, "noise rate must be >= 0");

  ctx.manifest.seeds.push_back(seed);
  ctx.note("kind", std::string(st::sim::to_string(kind)));
  ctx.note("amplitude_px", num(p.amplitude_px));
  ctx.note("period_ms", num(p.period_ms));
  ctx.note("tau_ms", num(p.hysteresis.tau_ms));
  ctx.note("residual_fraction", num(p.hysteresis.residual_fraction));
  ctx.note("noise_rate", num(noise_rate));
  ctx.note("contrast_threshold", num(contrast));
  ctx.note("resolution", o.resolution);

  st::sim::SimScene scene;
  {
    st::cli::StageTimer t(ctx.manifest, "scene");
    scene = st::sim::make_interaction(kind, p, st::derive_seed(seed, 1));
    for (const auto& r : scene.layout.rest) {
      const double m = scene.layout.radius_px + scene.pitch_px / 2.0;
      if (r.x - m < 0.0 || r.y - m < 0.0 || r.x + m > double(w) || r.y + m > double(h)) {
        st::fail(st::ErrorKind::validation, "marker grid does not fit resolution " + o.resolution);
      }
    }
  }
  std::vector<st::Event> events;
  {
    st::cli::StageTimer t(ctx.manifest, "generate");
    events = st::generate_events(scene, contrast, st::NoiseModel{noise_rate, st::derive_seed(seed, 2)},
                                 0, scene.t_end_us + 1);
  }
  const std::uint64_t boot = scene.bootstrap_end_us;
  const auto split = std::partition_point(events.begin(), events.end(),
                                          [&](const st::Event& e) { return e.t < boot; });
  const std::vector<st::Event> calib(events.begin(), split), body(split, events.end());

  std::string calib_out = o.calib_out;
  if (calib_out.empty()) {
    fs::path c = o.out;
    calib_out = (c.parent_path() / (c.stem().string() + ".calib.evt")).string();
  }
  st::cli::StageTimer t(ctx.manifest, "write");
  ctx.artifacts->write_bytes(
      calib_out, st::encode_event_stream(st::make_header(calib, w, h, 0, boot - 1), calib));
  const auto body_header = st::make_header(body, w, h, boot, scene.t_end_us);
  ctx.artifacts->write_bytes(o.out, st::encode_event_stream(body_header, body));

  auto& truth = ctx.artifacts->open(o.truth);
  truth << "t_us,marker_id,x,y,rest_x,rest_y\n";
  for (std::uint64_t tu = 0; tu <= scene.t_end_us; tu += 1000) {
    const auto pos = st::sim::ground_truth_positions(scene, double(tu));
    for (std::size_t i = 0; i < pos.size(); ++i) {
      truth << tu << ',' << i << ',' << num(pos[i].x) << ',' << num(pos[i].y) << ','
            << num(scene.layout.rest[i].x) << ',' << num(scene.layout.rest[i].y) << '\n';
    }
  }
  ctx.log() << "simulate: " << events.size() << " events (" << calib.size()
            << " calibration), " << scene.t_end_us / 1000 << " ms\n";
  return 0;
}

// ---------------------------------------------------------------------------
// statemap / denoise

struct StatemapOpts {
  std::string in;
  std::string out = "map.pgm";
  std::optional<std::uint64_t> until;
};

int cmd_statemap(Context& ctx, const StatemapOpts& o) {
  const auto s = load_stream(ctx, o.in);
  st::StateMap map(s.header.width, s.header.height);
  std::size_t n = 0;
  for (const auto& e : s.events) {
    if (o.until && e.t > *o.until) break;
    map.apply(e);
    ++n;
  }
  std::ostringstream pgm;
  st::write_pgm(pgm, map.snapshot());
  ctx.artifacts->write_text(o.out, pgm.str());
  ctx.log() << "statemap: applied " << n << " events, " << map.count_white() << " white cells\n";
  return 0;
}

struct DenoiseOpts {
  std::string in;
  std::string out = "clean.pgm";
  std::optional<std::size_t> min_area;
  std::optional<std::size_t> closing;
};

int cmd_denoise(Context& ctx, const DenoiseOpts& o) {
  st::DenoiserConfig d = denoiser_config(ctx.cfg);
  if (o.min_area) d.min_component_area = *o.min_area;
  if (o.closing) d.closing_radius = *o.closing;
  st::validate(d);
  ctx.note("min_component_area", std::to_string(d.min_component_area));
  ctx.note("closing_radius", std::to_string(d.closing_radius));
  ctx.input(o.in);
  const auto img = st::read_pgm(o.in);
  const auto clean = st::denoise(img, d);
  std::ostringstream pgm;
  st::write_pgm(pgm, clean);
  ctx.artifacts->write_text(o.out, pgm.str());
  ctx.log() << "denoise: " << img.count_white() << " -> " << clean.count_white() << " white\n";
  return 0;
}

// ---------------------------------------------------------------------------
// track

struct TrackOpts {
  std::string in;
  std::string calib;
  std::string out = "tracks.csv";
  std::optional<double> gamma;
  std::optional<double> delta;
};

int cmd_track(Context& ctx, const TrackOpts& o) {
  st::PipelineConfig pc{tracker_config(ctx.cfg), denoiser_config(ctx.cfg)};
  if (o.gamma) pc.tracker.gamma = *o.gamma;
  if (o.delta) pc.tracker.delta = *o.delta;
  st::validate(pc.tracker);
  for (const auto& [k, v] : std::map<std::string, double>{{"delta", pc.tracker.delta},
                                                          {"gamma", pc.tracker.gamma},
                                                          {"assoc_radius", pc.tracker.assoc_radius}}) {
    ctx.note(k, num(v));
  }
  const auto cal = load_stream(ctx, o.calib);
  const auto body = load_stream(ctx, o.in);
  if (cal.header.width != body.header.width || cal.header.height != body.header.height) {
    st::fail(st::ErrorKind::validation, "calibration and tracking streams differ in resolution");
  }
  if (cal.header.t_end >= body.header.t_start) {
    st::fail(st::ErrorKind::ordering, "calibration stream must end before the tracking stream");
  }
  st::TrackingSession session(body.header.width, body.header.height, pc);
  std::size_t epochs = 0;
  {
    st::cli::StageTimer t(ctx.manifest, "calibrate");
    epochs = session.calibrate_from(cal.events, cal.header.t_start, cal.header.t_end);
  }
  auto& out = ctx.artifacts->open(o.out);
  out << "t_us,marker_id,det_x,det_y,real_x,real_y,held\n";
  std::size_t frames = 0;
  {
    st::cli::StageTimer t(ctx.manifest, "track");
    frames = session.track(body.events, body.header.t_start, body.header.t_end,
                           [&](std::uint64_t tu, std::span<const st::MarkerTrack> tracks) {
                             for (const auto& tr : tracks) {
                               out << tu << ',' << tr.id << ',' << num(tr.p_det.x) << ','
                                   << num(tr.p_det.y) << ',' << num(tr.p_real.x) << ','
                                   << num(tr.p_real.y) << ',' << (tr.held ? 1 : 0) << '\n';
                             }
                           });
  }
  const auto rep = session.report();
  ctx.log() << "track: " << epochs << " calibration epochs, " << frames
            << " frames, final mean error " << num(rep.mean_error, 4) << " px vs reference\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
  std::string tracks;
  std::string truth;
  std::string out = "report.json";
};

int cmd_eval(Context& ctx, const EvalOpts& o) {
  const auto tc = tracker_config(ctx.cfg);
  ctx.input(o.tracks);
  ctx.input(o.truth);
  const auto tr = st::cli::read_csv(o.tracks);
  const auto gt = st::cli::read_csv(o.truth);
  const std::size_t c_t = tr.column("t_us", o.tracks), c_id = tr.column("marker_id", o.tracks),
                    c_dx = tr.column("det_x", o.tracks), c_dy = tr.column("det_y", o.tracks),
                    c_rx = tr.column("real_x", o.tracks), c_ry = tr.column("real_y", o.tracks);
  const std::size_t g_t = gt.column("t_us", o.truth), g_id = gt.column("marker_id", o.truth),
                    g_x = gt.column("x", o.truth), g_y = gt.column("y", o.truth),
                    g_rx = gt.column("rest_x", o.truth), g_ry = gt.column("rest_y", o.truth);

  std::map<std::size_t, st::Vec2> rest;
  std::map<std::pair<std::uint64_t, std::size_t>, st::Vec2> truth_at;
  for (std::size_t r = 0; r < gt.rows.size(); ++r) {
    const auto id = std::size_t(gt.number(r, g_id, o.truth));
    rest[id] = {gt.number(r, g_rx, o.truth), gt.number(r, g_ry, o.truth)};
    truth_at[{std::uint64_t(gt.number(r, g_t, o.truth)), id}] = {gt.number(r, g_x, o.truth),
                                                                 gt.number(r, g_y, o.truth)};
  }
  struct Last {
    std::uint64_t t = 0;
    st::Vec2 real;
  };
  std::map<std::size_t, Last> last;
  std::map<std::size_t, st::Vec2> first_real;
  std::vector<std::pair<std::uint64_t, std::pair<std::size_t, st::Vec2>>> dets;
  for (std::size_t r = 0; r < tr.rows.size(); ++r) {
    const auto t = std::uint64_t(tr.number(r, c_t, o.tracks));
    const auto id = std::size_t(tr.number(r, c_id, o.tracks));
    const st::Vec2 real{tr.number(r, c_rx, o.tracks), tr.number(r, c_ry, o.tracks)};
    if (!first_real.count(id)) first_real[id] = real;
    auto& l = last[id];
    if (t >= l.t) l = {t, real};
    dets.push_back({t, {id, {tr.number(r, c_dx, o.tracks), tr.number(r, c_dy, o.tracks)}}});
  }

  // Track ids map to truth markers by nearest rest position.
  std::vector<st::Vec2> rest_pts;
  std::vector<std::size_t> rest_ids;
  for (const auto& [id, p] : rest) {
    rest_ids.push_back(id);
    rest_pts.push_back(p);
  }
  std::map<std::size_t, std::size_t> to_truth;
  if (!rest_pts.empty()) {
    const st::KdTree2 tree(rest_pts);
    for (const auto& [id, p] : first_real) {
      if (const auto hit = tree.nearest(p); hit && hit->distance <= tc.assoc_radius) {
        to_truth[id] = rest_ids[hit->index];
      }
    }
  }

  std::vector<double> errors;
  json per = json::array();
  for (const auto& [id, l] : last) {
    const auto it = to_truth.find(id);
    if (it == to_truth.end()) continue;
    const double e = st::distance(l.real, rest[it->second]);
    errors.push_back(e);
    per.push_back({{"marker_id", id}, {"truth_id", it->second}, {"final_error_px", e}});
  }
  double mean = 0.0, sd = 0.0, mx = 0.0;
  if (!errors.empty()) {
    mean = std::accumulate(errors.begin(), errors.end(), 0.0) / double(errors.size());
    for (double e : errors) {
      sd += (e - mean) * (e - mean);
      mx = std::max(mx, e);
    }
    sd = std::sqrt(sd / double(errors.size()));
  }
  double ss = 0.0;
  std::size_t n_det = 0;
  for (const auto& [t, d] : dets) {
    const auto it = to_truth.find(d.first);
    if (it == to_truth.end()) continue;
    const auto g = truth_at.find({t, it->second});
    if (g == truth_at.end()) continue;
    ss += (d.second - g->second).squared_norm();
    ++n_det;
  }
  const bool success = !rest.empty() && errors.size() == rest.size() &&
                       std::all_of(errors.begin(), errors.end(),
                                   [&](double e) { return e < tc.success_radius; });
  json rep;
  rep["success"] = success;
  rep["markers_expected"] = rest.size();
  rep["markers_matched"] = errors.size();
  rep["success_radius_px"] = tc.success_radius;
  rep["mean_error"] = mean;
  rep["std_error"] = sd;
  rep["max_error"] = mx;
  rep["detection_rmse_px"] = n_det ? std::sqrt(ss / double(n_det)) : 0.0;
  rep["per_marker"] = per;
  ctx.artifacts->write_text(o.out, rep.dump(2) + "\n");
  if (!ctx.g.quiet) std::cout << rep.dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// collide

struct CollideOpts {
  std::string sweep = "0.01:0.18:0.01";
  std::string detector = "both";
  std::size_t seeds = 5;
  double noise_rate = 1.0;
  double jitter_mm = 0.0;
  std::string out = "sweep.csv";
  std::string plot;
};

int cmd_collide(Context& ctx, const CollideOpts& o) {
  const auto spec = parse_sweep(o.sweep);
  std::vector<st::DetectorKind> kinds;
  if (o.detector == "event" || o.detector == "both") kinds.push_back(st::DetectorKind::event);
  if (o.detector == "baseline" || o.detector == "both") kinds.push_back(st::DetectorKind::baseline);
  if (kinds.empty()) st::fail(st::ErrorKind::validation, "bad --detector '" + o.detector + "'");
  if (o.seeds == 0) st::fail(st::ErrorKind::validation, "--seeds must be >= 1");
  if (o.noise_rate < 0.0) st::fail(st::ErrorKind::validation, "noise rate must be >= 0");

  st::sim::ApproachScenario scn;
  scn.x_real_mm = ctx.cfg.get_double("x_real_mm", scn.x_real_mm);
  scn.burst_events_per_mm = ctx.cfg.get_double("burst_events_per_mm", scn.burst_events_per_mm);
  st::sim::RobotReaction reaction;
  reaction.command_latency_ms = ctx.cfg.get_double("command_latency_ms", reaction.command_latency_ms);
  reaction.deceleration_m_s2 = ctx.cfg.get_double("deceleration_m_s2", reaction.deceleration_m_s2);
  st::CollisionTrialOptions opt;
  opt.noise.rate = o.noise_rate;
  opt.start_jitter_mm = o.jitter_mm;
  opt.baseline.frame_rate = ctx.cfg.get_double("frame_rate", opt.baseline.frame_rate);
  opt.baseline.epsilon_threshold = ctx.cfg.get_double("epsilon_threshold", opt.baseline.epsilon_threshold);
  ctx.note("sweep", o.sweep);
  ctx.note("detector", o.detector);
  ctx.note("seeds", std::to_string(o.seeds));
  ctx.note("noise_rate", num(o.noise_rate));
  ctx.note("start_jitter_mm", num(o.jitter_mm));

  const auto velocities = st::velocity_grid(spec.lo, spec.hi, spec.step);
  std::vector<st::SweepRow> rows;
  {
    st::cli::StageTimer t(ctx.manifest, "sweep");
    for (std::size_t vi = 0; vi < velocities.size(); ++vi) {
      for (auto kind : kinds) {
        double sp = 0.0, se = 0.0, stt = 0.0;
        std::size_t hits = 0;
        for (std::size_t s = 0; s < o.seeds; ++s) {
          st::sim::ApproachScenario trial = scn;
          trial.seed = st::derive_seed(ctx.g.seed, vi, s);
          const auto rep = st::run_collision_trial(trial, velocities[vi], kind, reaction, opt);
          if (!rep.triggered) continue;
          ++hits;
          sp += rep.delta_x_p;
          se += rep.delta_x_e;
          stt += double(rep.t_trigger);
        }
        const double nan = std::numeric_limits<double>::quiet_NaN();
        rows.push_back({velocities[vi], kind, hits ? sp / double(hits) : nan,
                        hits ? se / double(hits) : nan, hits ? stt / double(hits) : nan, hits});
      }
    }
  }
  for (std::size_t s = 0; s < o.seeds; ++s) ctx.manifest.seeds.push_back(st::derive_seed(ctx.g.seed, 0, s));

  auto& csv = ctx.artifacts->open(o.out);
  csv << "v_mps,detector,delta_x_p_mm,delta_x_e_mm,t_trigger_us\n";
  for (const auto& r : rows) {
    csv << num(r.v_mps, 3) << ',' << st::to_string(r.detector) << ',' << num(r.delta_x_p_mm) << ','
        << num(r.delta_x_e_mm) << ',' << num(r.t_trigger_us, 1) << '\n';
  }
  if (!o.plot.empty()) {
    st::svg::Plot plot;
    plot.title = "Stop-pose deviation vs approach velocity";
    plot.x_label = "v [m/s]";
    plot.y_label = "deviation [mm]";
    const char* colors[2][2] = {{"#d62728", "#ff9896"}, {"#1f77b4", "#aec7e8"}};
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      st::svg::Series p{std::string(st::to_string(kinds[k])) + " dX_p", colors[k][0], {}, true, false};
      st::svg::Series e{std::string(st::to_string(kinds[k])) + " dX_e", colors[k][1], {}, true, true};
      for (const auto& r : rows) {
        if (r.detector != kinds[k] || r.triggered == 0) continue;
        p.points.push_back({r.v_mps, r.delta_x_p_mm});
        e.points.push_back({r.v_mps, r.delta_x_e_mm});
      }
      plot.series.push_back(p);
      plot.series.push_back(e);
    }
    ctx.artifacts->write_text(o.plot, st::svg::to_string(plot));
  }
  ctx.log() << "collide: " << rows.size() << " rows\n";
  return 0;
}

// ---------------------------------------------------------------------------
// holes

struct HolesOpts {
  std::string model;
  double noise = 0.05;
  std::size_t seeds = 20;
  std::optional<double> step;
  std::string out = "holes.csv";
  std::string plot;
  std::string summary = "holes_summary.json";
};

std::vector<st::sim::Hole> load_hole_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) st::fail(st::ErrorKind::io, "cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    st::fail(st::ErrorKind::validation, path + ": invalid JSON at byte " + std::to_string(e.byte));
  }
  if (!j.is_array()) st::fail(st::ErrorKind::validation, path + ": expected a list of holes");
  std::vector<st::sim::Hole> holes;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& h = j[i];
    for (const char* key : {"x_mm", "y_mm", "r_mm"}) {
      if (!h.is_object() || !h.contains(key) || !h[key].is_number()) {
        st::fail(st::ErrorKind::validation,
                 path + ": hole " + std::to_string(i) + " lacks numeric '" + key + "'", i);
      }
    }
    holes.push_back({{h["x_mm"].get<double>(), h["y_mm"].get<double>()}, h["r_mm"].get<double>()});
  }
  return holes;
}

int cmd_holes(Context& ctx, const HolesOpts& o) {
  st::sim::HoleWorld world;
  if (!o.model.empty()) {
    ctx.input(o.model);
    world.holes = load_hole_model(o.model);
  } else {
    world.holes = st::default_hole_model();
  }
  if (o.noise < 0.0) st::fail(st::ErrorKind::validation, "--noise must be >= 0");
  if (o.seeds == 0) st::fail(st::ErrorKind::validation, "--seeds must be >= 1");
  world.contact_noise_mm = o.noise;
  world.quiescent_count = ctx.cfg.get_double("quiescent_count", 20.0);
  world.trigger_depth_mm = ctx.cfg.get_double("trigger_depth_mm", world.trigger_depth_mm);
  st::sim::validate(world);
  st::ProbeSpec probe;
  probe.diameter_mm = ctx.cfg.get_double("probe_diameter_mm", probe.diameter_mm);
  probe.delta_crit_mm = ctx.cfg.get_double("delta_crit_mm", world.trigger_depth_mm);
  probe.step_mm = o.step ? *o.step : ctx.cfg.get_double("step_mm", probe.step_mm);
  st::validate(probe);
  ctx.note("noise_mm", num(o.noise));
  ctx.note("seeds", std::to_string(o.seeds));
  ctx.note("step_mm", num(probe.step_mm));
  ctx.note("probe_diameter_mm", num(probe.diameter_mm));
  ctx.note("delta_crit_mm", num(probe.delta_crit_mm));

  st::CollisionConfig det;
  det.count_threshold = st::calibrate_contact_threshold(world, probe, det, st::derive_seed(ctx.g.seed, 7));
  ctx.note("count_threshold", num(det.count_threshold, 1));

  auto& csv = ctx.artifacts->open(o.out);
  csv << "seed,hole,est_x_mm,est_y_mm,true_x_mm,true_y_mm,est_r_mm,true_r_mm,pos_error_mm,"
         "radius_error_mm\n";
  std::vector<st::HoleEvaluation> evals;
  {
    st::cli::StageTimer t(ctx.manifest, "search");
    for (std::size_t s = 0; s < o.seeds; ++s) {
      const std::uint64_t seed = st::derive_seed(ctx.g.seed, 0x686f6c65, s);
      ctx.manifest.seeds.push_back(seed);
      evals.push_back(st::run_hole_trial(world, probe, det, seed));
      for (std::size_t i = 0; i < evals.back().rows.size(); ++i) {
        const auto& r = evals.back().rows[i];
        csv << s << ',' << i << ',' << num(r.estimated.x) << ',' << num(r.estimated.y) << ','
            << num(r.truth.x) << ',' << num(r.truth.y) << ',' << num(r.r_estimated) << ','
            << num(r.r_true) << ',' << num(r.pos_error) << ',' << num(r.radius_error) << '\n';
      }
    }
  }
  double rmse = 0.0, rabs = 0.0, rsig = 0.0;
  for (const auto& e : evals) {
    rmse += e.summary.pos_rmse * e.summary.pos_rmse;
    rabs += e.summary.radius_mean_abs;
    rsig += e.summary.radius_mean_signed;
  }
  const double n = double(evals.size());
  json sum;
  sum["holes"] = world.holes.size();
  sum["seeds"] = o.seeds;
  sum["noise_mm"] = o.noise;
  sum["pos_rmse_mm"] = std::sqrt(rmse / n);
  sum["radius_mean_abs_mm"] = rabs / n;
  sum["radius_mean_signed_mm"] = rsig / n;
  ctx.artifacts->write_text(o.summary, sum.dump(2) + "\n");

  if (!o.plot.empty()) {
    st::svg::Plot plot;
    plot.title = "Estimated (dashed) vs model (solid) holes, seed 0";
    plot.x_label = "x [mm]";
    plot.y_label = "y [mm]";
    plot.equal_aspect = true;
    for (const auto& r : evals.front().rows) {
      plot.circles.push_back({r.truth, r.r_true, "#d62728", false});
      plot.circles.push_back({r.estimated, r.r_estimated, "#1f77b4", true});
    }
    ctx.artifacts->write_text(o.plot, st::svg::to_string(plot));
  }
  if (!ctx.g.quiet) std::cout << sum.dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchOpts {
  std::string in;
  std::string calib;
  std::size_t repeat = 5;
  std::string out = "bench.json";
};

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

int cmd_bench(Context& ctx, const BenchOpts& o) {
  if (o.repeat == 0) st::fail(st::ErrorKind::validation, "--repeat must be >= 1");
  const auto s = load_stream(ctx, o.in);
  std::optional<st::EventStream> cal;
  if (!o.calib.empty()) cal = load_stream(ctx, o.calib);
  st::PipelineConfig pc{tracker_config(ctx.cfg), denoiser_config(ctx.cfg)};
  using clock = std::chrono::steady_clock;

  std::vector<double> ingest, updates;
  std::size_t windows = 0;
  for (std::size_t run = 0; run < o.repeat; ++run) {
    // State-map ingestion, repeated until the sample spans at least 0.2 s.
    std::size_t applied = 0;
    const auto t0 = clock::now();
    double dt = 0.0;
    do {
      st::StateMap map(s.header.width, s.header.height);
      for (const auto& e : s.events) map.apply(e);
      applied += s.events.size();
      dt = std::chrono::duration<double>(clock::now() - t0).count();
    } while (dt < 0.2 && !s.events.empty());
    ingest.push_back(applied ? double(applied) / dt : 0.0);

    st::TrackingSession session(s.header.width, s.header.height, pc);
    bool ready = false;
    if (cal) {
      session.calibrate_from(cal->events, cal->header.t_start, cal->header.t_end);
      ready = true;
    }
    windows = 0;
    st::MarkerPipeline probe(s.header.width, s.header.height, pc);
    const auto t1 = clock::now();
    if (ready) {
      windows = session.track(s.events, s.header.t_start, s.header.t_end);
    } else {
      // No calibration stream: adopt the first frame with detections.
      std::vector<st::MarkerTrack> tracks;
      st::TrackerConfig tc = pc.tracker;
      st::for_each_window(s.events, tc.window_us, s.header.t_start, s.header.t_end,
                          [&](std::uint64_t, std::uint64_t w0, std::span<const st::Event> evs) {
                            const auto& dets = probe.process_window(evs);
                            if (tracks.empty() && !dets.empty()) {
                              tc.expected_markers = dets.size();
                              const std::vector<std::vector<st::Centroid>> ep{dets};
                              tracks = st::calibrate(ep, tc);
                            } else {
                              st::track_step(dets, tracks, tc, w0 + tc.window_us);
                            }
                            ++windows;
                          });
    }
    const double dt1 = std::chrono::duration<double>(clock::now() - t1).count();
    updates.push_back(windows && dt1 > 0.0 ? double(windows) / dt1 : 0.0);
  }
  json rep;
  rep["events"] = s.events.size();
  rep["windows"] = windows;
  rep["runs"] = o.repeat;
  rep["statemap_events_per_s"] = median(ingest);
  rep["pipeline_updates_per_s"] = median(updates);
  rep["statemap_events_per_s_runs"] = ingest;
  rep["pipeline_updates_per_s_runs"] = updates;
  ctx.artifacts->write_text(o.out, rep.dump(2) + "\n");
  if (!ctx.g.quiet) std::cout << rep.dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

void print_error(const std::string& kind, const std::string& message,
                 std::optional<std::uint64_t> pos = std::nullopt) {
  json j;
  j["error"] = kind;
  j["message"] = message;
  if (pos) j["position"] = *pos;
  std::cerr << j.dump() << std::endl;
}

void write_manifest(Context& ctx) {
  try {
    const fs::path path = fs::path(ctx.g.out_dir) / "run-manifest.json";
    std::error_code ec;
    fs::create_directories(ctx.g.out_dir, ec);
    fs::path tmp = path;
    tmp += ".partial";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << ctx.manifest.to_json(SPIKETRACK_VERSION).dump(2) << '\n';
      if (!out) return;
    }
    fs::rename(tmp, path, ec);
  } catch (...) {
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-driven tactile marker tracking, collision and hole-geometry toolkit",
               "spiketrack"};
  app.set_version_flag("--version", SPIKETRACK_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  Context ctx;
  app.add_option("--seed", ctx.g.seed, "Base random seed");
  app.add_option("--config", ctx.g.config_path, "key=value configuration file");
  app.add_option("--out-dir", ctx.g.out_dir, "Directory for outputs and run-manifest.json");
  app.add_flag("--quiet", ctx.g.quiet, "Suppress progress output");

  SimulateOpts so;
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic interaction stream");
  sim->add_option("--scenario", so.scenario, "Scenario key=value file");
  sim->add_option("--kind", so.kind, "press|slide|torsion|circular|drag_release");
  sim->add_option("--amplitude", so.amplitude, "Peak marker displacement [px]");
  sim->add_option("--out", so.out, "Interaction stream (.evt)");
  sim->add_option("--calib-out", so.calib_out, "Calibration stream (.evt)");
  sim->add_option("--truth", so.truth, "Ground-truth marker positions (.csv)");
  sim->add_option("--resolution", so.resolution, "Sensor resolution WxH");
  sim->add_option("--noise-rate", so.noise_rate, "Background events per pixel per second");
  sim->add_option("--contrast-threshold", so.contrast, "Log-intensity contrast threshold");

  StatemapOpts mo;
  auto* smap = app.add_subcommand("statemap", "Reconstruct the state map of a stream");
  smap->add_option("--in", mo.in, "Input stream (.evt)")->required();
  smap->add_option("--out", mo.out, "Output image (.pgm)");
  smap->add_option("--until", mo.until, "Stop after this timestamp [us]");

  DenoiseOpts dno;
  auto* den = app.add_subcommand("denoise", "Denoise a binary image");
  den->add_option("--in", dno.in, "Input image (.pgm)")->required();
  den->add_option("--out", dno.out, "Output image (.pgm)");
  den->add_option("--min-area", dno.min_area, "Minimum component area [px]");
  den->add_option("--closing", dno.closing, "Closing radius [px]");

  TrackOpts to;
  auto* trk = app.add_subcommand("track", "Calibrate and track markers");
  trk->add_option("--in", to.in, "Interaction stream (.evt)")->required();
  trk->add_option("--calib", to.calib, "Calibration stream (.evt)")->required();
  trk->add_option("--out", to.out, "Track table (.csv)");
  trk->add_option("--gamma", to.gamma, "Damping gain inside the uncertainty window");
  trk->add_option("--delta", to.delta, "Uncertainty window radius [px]");

  EvalOpts eo;
  auto* ev = app.add_subcommand("eval", "Evaluate tracks against ground truth");
  ev->add_option("--tracks", eo.tracks, "Track table (.csv)")->required();
  ev->add_option("--truth", eo.truth, "Ground-truth table (.csv)")->required();
  ev->add_option("--out", eo.out, "Report (.json)");

  CollideOpts co;
  auto* col = app.add_subcommand("collide", "Collision detection velocity sweep");
  col->add_option("--sweep", co.sweep, "Velocities lo:hi:step [m/s]");
  col->add_option("--detector", co.detector, "event|baseline|both");
  col->add_option("--seeds", co.seeds, "Trials per velocity");
  col->add_option("--noise-rate", co.noise_rate, "Background events per pixel per second");
  col->add_option("--start-jitter", co.jitter_mm, "Sigma of the true obstacle offset [mm]");
  col->add_option("--out", co.out, "Sweep table (.csv)");
  col->add_option("--plot", co.plot, "Sweep plot (.svg)");

  HolesOpts ho;
  auto* hol = app.add_subcommand("holes", "Cross-search hole estimation");
  hol->add_option("--model", ho.model, "Hole model (.json list of {x_mm, y_mm, r_mm})");
  hol->add_option("--noise", ho.noise, "Contact-point noise sigma [mm]");
  hol->add_option("--seeds", ho.seeds, "Number of trials");
  hol->add_option("--step", ho.step, "Probe step [mm]");
  hol->add_option("--out", ho.out, "Per-hole table (.csv)");
  hol->add_option("--plot", ho.plot, "Hole plot (.svg)");
  hol->add_option("--summary", ho.summary, "Summary (.json)");

  BenchOpts bo;
  auto* ben = app.add_subcommand("bench", "Throughput benchmark");
  ben->add_option("--in", bo.in, "Stream (.evt)")->required();
  ben->add_option("--calib", bo.calib, "Calibration stream (.evt)");
  ben->add_option("--repeat", bo.repeat, "Number of runs");
  ben->add_option("--out", bo.out, "Report (.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  ctx.manifest.command = sub->get_name();
  int code = 0;
  try {
    ctx.artifacts = std::make_unique<st::cli::ArtifactSet>(ctx.g.out_dir);
    if (!ctx.g.config_path.empty()) {
      ctx.input(ctx.g.config_path);
      ctx.cfg = st::KeyValueConfig::load(ctx.g.config_path);
    }
    for (const auto& [k, v] : ctx.cfg.values()) ctx.manifest.config[k] = v;
    ctx.manifest.config["seed"] = std::to_string(ctx.g.seed);

    const std::string& name = ctx.manifest.command;
    if (name == "simulate") code = cmd_simulate(ctx, so);
    else if (name == "statemap") code = cmd_statemap(ctx, mo);
    else if (name == "denoise") code = cmd_denoise(ctx, dno);
    else if (name == "track") code = cmd_track(ctx, to);
    else if (name == "eval") code = cmd_eval(ctx, eo);
    else if (name == "collide") code = cmd_collide(ctx, co);
    else if (name == "holes") code = cmd_holes(ctx, ho);
    else if (name == "bench") code = cmd_bench(ctx, bo);
    ctx.manifest.outputs = ctx.artifacts->pending();
    ctx.artifacts->commit();
  } catch (const st::Error& e) {
    if (ctx.artifacts) ctx.artifacts->discard();
    ctx.manifest.status = "error";
    ctx.manifest.error = e.what();
    ctx.manifest.outputs.clear();
    print_error(std::string(st::to_string(e.kind())), e.what(), e.position());
    code = e.kind() == st::ErrorKind::io ? 1 : 2;
  } catch (const std::exception& e) {
    if (ctx.artifacts) ctx.artifacts->discard();
    ctx.manifest.status = "error";
    ctx.manifest.error = e.what();
    ctx.manifest.outputs.clear();
    print_error("io", e.what());
    code = 1;
  }
  write_manifest(ctx);
  return code;
}

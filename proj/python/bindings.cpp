#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pipsim/analysis.hpp"
#include "pipsim/io.hpp"
#include "pipsim/noise.hpp"
#include "pipsim/scheduler.hpp"
#include "pipsim/simulator.hpp"

namespace py = pybind11;
using namespace pipsim;

namespace {

using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using I32 = py::array_t<int, py::array::c_style | py::array::forcecast>;

template <class T, class A>
Grid<T> to_grid(const A& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  Grid<T> g(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), g.flat().begin());
  return g;
}

F64 to_array(const Grid<double>& g) {
  F64 out({g.rows(), g.cols()});
  std::copy(g.flat().begin(), g.flat().end(), out.mutable_data());
  return out;
}

std::vector<WeightKernel> to_kernels(const std::vector<I32>& weights) {
  std::vector<WeightKernel> ks;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    WeightKernel k;
    k.weights = to_grid<int>(weights[c]);
    if (k.weights.rows() != k.weights.cols() || k.weights.rows() % 2 != 0)
      throw py::value_error("kernels must be square with an even side (2r x 2r)");
    k.r = static_cast<int>(k.weights.rows() / 2);
    k.channel_id = static_cast<int>(c);
    ks.push_back(std::move(k));
  }
  return ks;
}

ValidatedConfig config_for(const Grid<double>& currents) {
  SensorConfig c;
  c.height_px = static_cast<int>(currents.rows());
  c.width_px = static_cast<int>(currents.cols());
  return validate_config(c);
}

py::list maps_to_list(const std::vector<FeatureMap>& maps) {
  py::list out;
  for (const auto& m : maps) out.append(to_array(m.values));
  return out;
}

}  // namespace

PYBIND11_MODULE(_pipsim, m) {
  m.doc() = "Processing-in-pixel image sensor simulator";
  m.attr("__version__") = kToolVersion;

  py::register_exception<InvalidConfig>(m, "InvalidConfig", PyExc_ValueError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", PyExc_ValueError);
  py::register_exception<UnsupportedGeometry>(m, "UnsupportedGeometry", PyExc_ValueError);
  py::register_exception<InfeasibleTiming>(m, "InfeasibleTiming", PyExc_RuntimeError);

  m.def("min_adc_rate", &min_adc_rate, py::arg("f"), py::arg("n"), py::arg("H"), py::arg("r"), py::arg("s"));
  m.def("max_real_frame_rate", &max_real_frame_rate, py::arg("r"), py::arg("s"),
        py::arg("t_expo") = kTableExposure);
  m.def("floor_rate", &floor_rate);
  m.def(
      "rate_report",
      [](int r, int s, double f, int n, int H, double t_expo) {
        const RateReport rep = rate_report(r, s, f, n, H, t_expo);
        py::dict d;
        d["r"] = rep.r;
        d["s"] = rep.s;
        d["H"] = rep.H;
        d["f_real"] = rep.f_real;
        d["f_real_max"] = rep.f_real_max;
        d["f_adc_min"] = rep.f_adc_min;
        return d;
      },
      py::arg("r"), py::arg("s"), py::arg("f") = 60.0, py::arg("n") = 64, py::arg("H") = 128,
      py::arg("t_expo") = kTableExposure);
  m.def("total_ops", &total_ops, py::arg("out_h"), py::arg("out_w"), py::arg("in_ch"), py::arg("out_ch"),
        py::arg("fps"), py::arg("r"));
  m.def(
      "power_model",
      [](double fps, int r, int s) {
        const PowerReport p = power_model(fps, r, s);
        py::dict d;
        d["p_pixel"] = p.p_pixel;
        d["p_readout"] = p.p_readout;
        d["p_adc"] = p.p_adc;
        d["p_total"] = p.p_total;
        d["total_ops"] = p.total_ops;
        d["efficiency"] = p.efficiency;
        d["fom"] = p.fom;
        return d;
      },
      py::arg("fps"), py::arg("r"), py::arg("s"));

  m.def("equivalent_exposures", &equivalent_exposures, py::arg("r"), py::arg("s"),
        py::arg("include_transition_wait") = true);
  m.def(
      "schedule_summary",
      [](int r, int s, const std::string& policy, int height_px, int width_px) {
        SensorConfig c;
        c.height_px = height_px;
        c.width_px = width_px;
        const ValidatedConfig cfg = validate_config(c);
        const TileSchedule sched = build_timeline(plan_steps(r, s, cfg, parse_policy(policy)), cfg, {true});
        py::dict d;
        d["steps_per_pass"] = sched.steps_per_pass();
        d["total_steps"] = sched.total_steps();
        d["readouts_per_step"] = sched.max_readouts_per_step();
        d["out_rows"] = sched.out_rows;
        d["out_cols"] = sched.out_cols;
        d["wiring_ok"] = wiring_check(sched).ok();
        d["overlaps"] = find_overlaps(sched).size();
        d["cycle_time"] = sched.cycle_time;
        return d;
      },
      py::arg("r"), py::arg("s"), py::arg("policy") = "full-coverage", py::arg("height_px") = 128,
      py::arg("width_px") = 128);

  m.def(
      "oracle_conv",
      [](const F64& currents, const std::vector<I32>& weights, int s) {
        const PhotocurrentMap pm{to_grid<double>(currents)};
        const auto ks = to_kernels(weights);
        return maps_to_list(oracle_conv(pm, ks, s));
      },
      py::arg("currents"), py::arg("weights"), py::arg("stride"));

  m.def(
      "simulate",
      [](const F64& currents, const std::vector<I32>& weights, int s, bool ideal, bool noise, std::uint64_t seed,
         std::optional<double> snr_db) {
        const PhotocurrentMap pm{to_grid<double>(currents)};
        const auto ks = to_kernels(weights);
        const ValidatedConfig cfg = config_for(pm.amps);
        SimulationOptions opts = ideal ? SimulationOptions::ideal() : SimulationOptions{};
        if (noise) opts.noise = NoiseModel::typical(seed);
        opts.target_snr_db = snr_db;
        std::vector<FeatureMap> maps;
        {
          py::gil_scoped_release release;
          maps = simulate(pm, ks, s, cfg, opts).maps;
        }
        return maps_to_list(maps);
      },
      py::arg("currents"), py::arg("weights"), py::arg("stride"), py::arg("ideal") = true, py::arg("noise") = false,
      py::arg("seed") = 1, py::arg("snr_db") = py::none());

  m.def(
      "relative_rms",
      [](const F64& simulated, const F64& reference) {
        FeatureMap a{to_grid<double>(simulated), {}};
        FeatureMap b{to_grid<double>(reference), {}};
        return compare(a, b).rms;
      },
      py::arg("simulated"), py::arg("reference"));

  m.def("ktc_sigma", &ktc_sigma, py::arg("capacitance"), py::arg("temperature") = 300.0);
  m.def(
      "averaging_gain",
      [](int r, double sigma) {
        const AveragingGain g = averaging_gain(r, sigma);
        return py::make_tuple(g.noise_power, g.snr_gain);
      },
      py::arg("r"), py::arg("sigma"));
  m.def("inject_target_snr", &inject_target_snr, py::arg("signal_power"), py::arg("snr_db"));
}

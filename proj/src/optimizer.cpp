#include "fshapes/optimizer.hpp"

#include "fshapes/errors.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fshapes {

namespace {

using Clock = std::chrono::steady_clock;

void check_layout(const Blocks& a, const Blocks& b) {
  if (a.size() != b.size()) throw ValidationError("gradient has the wrong number of blocks");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) throw ValidationError("gradient block " + std::to_string(i) + " has the wrong size");
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string describe_steps(const std::vector<double>& steps) {
  std::string s;
  for (std::size_t i = 0; i < steps.size(); ++i) s += (i ? "," : "") + fmt(steps[i]);
  return s;
}

struct Runner {
  const Objective& objective;
  const OptimizerConfig& cfg;
  Clock::time_point start = Clock::now();
  int iteration = 0;

  [[noreturn]] void fail(const Blocks& u, const std::vector<double>& steps, double current, const char* what) const {
    std::string msg = std::string("objective is not finite (") + what + ") at iteration " + std::to_string(iteration) +
                      "; current energy " + fmt(current) + "; steps [" + describe_steps(steps) + "]";
    if (cfg.dump_path) {
      std::ofstream os(*cfg.dump_path);
      for (std::size_t b = 0; b < u.size(); ++b) {
        os << "# block " << b << '\n';
        for (Index k = 0; k < u[b].size(); ++k) os << fmt(u[b](k)) << '\n';
      }
      msg += "; state written to " + cfg.dump_path->string();
    }
    throw NumericalError(msg);
  }

  double energy(const Blocks& u, const std::vector<double>& steps, double current, const char* what) const {
    const double j = objective.energy(u).total;
    if (!std::isfinite(j)) fail(u, steps, current, what);
    return j;
  }

  double seconds() const { return std::chrono::duration<double>(Clock::now() - start).count(); }
};

Blocks step(const Blocks& u, const Blocks& g, const std::vector<double>& steps) {
  Blocks out(u.size());
  for (std::size_t b = 0; b < u.size(); ++b) out[b] = u[b] - steps[b] * g[b];
  return out;
}

bool all_zero(const Blocks& g) {
  for (const auto& b : g) {
    if (b.size() > 0 && b.cwiseAbs().maxCoeff() != 0.0) return false;
  }
  return true;
}

}  // namespace

void OptimizerConfig::validate(std::size_t num_blocks) const {
  if (step_sizes.size() != num_blocks) {
    throw ValidationError("expected " + std::to_string(num_blocks) + " step sizes, got " +
                          std::to_string(step_sizes.size()));
  }
  for (double d : step_sizes) {
    if (!(d > 0.0) || !std::isfinite(d)) throw ValidationError("step sizes must be positive and finite");
  }
  if (!(s_minus > 0.0 && s_minus < 1.0)) throw ValidationError("s_minus must lie in (0, 1)");
  if (!(s_plus > 1.0) || !std::isfinite(s_plus)) throw ValidationError("s_plus must be greater than 1");
  if (max_iters < 0) throw ValidationError("max_iters must be nonnegative");
  if (min_step && !(*min_step > 0.0)) throw ValidationError("min_step must be positive");
  if (min_decrease && !(*min_decrease >= 0.0)) throw ValidationError("min_decrease must be nonnegative");
}

std::string RunLog::csv() const {
  std::ostringstream os;
  const std::size_t K = records.empty() ? 0 : records.front().steps.size();
  os << "iteration,total,geometric,functional,attachment";
  for (std::size_t i = 1; i <= K; ++i) os << ",delta_" << i;
  os << '\n';
  for (const auto& r : records) {
    os << r.iteration << ',' << fmt(r.energy.total) << ',' << fmt(r.energy.geometric) << ','
       << fmt(r.energy.functional) << ',' << fmt(r.energy.attachment);
    for (double d : r.steps) os << ',' << fmt(d);
    os << '\n';
  }
  return os.str();
}

void RunLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << csv();
  if (!os) throw IoError("write failed: " + path.string());
}

MinimizeResult minimize(const Objective& objective, Blocks init, const OptimizerConfig& cfg) {
  cfg.validate(init.size());
  if (!objective.energy || !objective.evaluate) throw ValidationError("objective callbacks are not set");
  const std::size_t K = init.size();
  Runner run{objective, cfg};

  std::vector<double> delta = cfg.step_sizes;
  std::vector<double> min_step(K);
  for (std::size_t b = 0; b < K; ++b) min_step[b] = cfg.min_step ? *cfg.min_step : 1e-12 * cfg.step_sizes[b];

  MinimizeResult out;
  Blocks u = std::move(init);
  Blocks g;
  EnergyBreakdown cur = objective.evaluate(u, g);
  if (!std::isfinite(cur.total)) run.fail(u, delta, cur.total, "initial state");
  check_layout(u, g);
  const double min_decrease = cfg.min_decrease ? *cfg.min_decrease : 1e-10 * std::abs(cur.total);
  out.log.records.push_back({0, cur, delta, Candidate::Initial, -1, run.seconds()});

  // Energy of the joint candidate when it is already known from the
  // previous round (the uniform candidate of a failed round).
  bool joint_known = false;
  double joint_value = 0.0;
  std::string reason = "max_iters";
  while (run.iteration < cfg.max_iters) {
    if (all_zero(g)) {
      ++run.iteration;
      reason = "min_decrease";
      break;
    }
    bool tiny = true;
    for (std::size_t b = 0; b < K; ++b) tiny = tiny && delta[b] < min_step[b];
    if (tiny) {
      reason = "min_step";
      break;
    }

    const Blocks joint = step(u, g, delta);
    const double j_joint = joint_known ? joint_value : run.energy(joint, delta, cur.total, "joint candidate");
    joint_known = false;
    const double s = j_joint < cur.total ? cfg.s_plus : cfg.s_minus;

    // Candidates in tie-break order: joint, blocks by index, uniform.
    double best = j_joint;
    Candidate which = Candidate::Joint;
    int which_block = -1;
    Blocks best_u;
    for (std::size_t b = 0; b < K; ++b) {
      Blocks c = joint;
      c[b] = u[b] - s * delta[b] * g[b];
      const double j = run.energy(c, delta, cur.total, "block candidate");
      if (j < best) {
        best = j;
        which = Candidate::Block;
        which_block = static_cast<int>(b);
        best_u = std::move(c);
      }
    }
    std::vector<double> scaled(K);
    for (std::size_t b = 0; b < K; ++b) scaled[b] = s * delta[b];
    Blocks uniform = step(u, g, scaled);
    const double j_uniform = run.energy(uniform, scaled, cur.total, "uniform candidate");
    if (j_uniform < best) {
      best = j_uniform;
      which = Candidate::Uniform;
      which_block = -1;
    }

    if (!(best < cur.total)) {
      // Nothing improved: shrink every step; the next joint candidate is
      // the uniform one just evaluated.
      delta = scaled;
      joint_known = true;
      joint_value = j_uniform;
      continue;
    }

    ++run.iteration;
    if (which == Candidate::Joint) {
      best_u = joint;
    } else if (which == Candidate::Block) {
      delta[static_cast<std::size_t>(which_block)] *= s;
    } else {
      best_u = std::move(uniform);
      delta = scaled;
    }
    u = std::move(best_u);
    const double previous = cur.total;
    cur = objective.evaluate(u, g);
    if (!std::isfinite(cur.total)) run.fail(u, delta, previous, "accepted state");
    check_layout(u, g);
    out.log.records.push_back({run.iteration, cur, delta, which, which_block, run.seconds()});
    if (previous - cur.total < min_decrease) {
      reason = "min_decrease";
      break;
    }
  }
  out.log.iterations = run.iteration;
  out.log.stop_reason = reason;
  out.blocks = std::move(u);
  return out;
}

MultiscaleResult multiscale_run(const std::function<Objective(const KernelConfig&)>& problem, Blocks init,
                                const OptimizerConfig& cfg, const std::vector<ScaleStage>& schedule) {
  if (schedule.empty()) throw ValidationError("multiscale schedule is empty");
  for (const auto& st : schedule) {
    st.kernel.validate();
    if (st.iters < 0) throw ValidationError("stage iteration count must be nonnegative");
  }
  MultiscaleResult out;
  out.blocks = std::move(init);
  for (const auto& st : schedule) {
    OptimizerConfig c = cfg;
    c.max_iters = st.iters;
    MinimizeResult r = minimize(problem(st.kernel), std::move(out.blocks), c);
    out.blocks = std::move(r.blocks);
    out.stages.push_back(std::move(r.log));
  }
  return out;
}

std::vector<ScaleStage> parse_schedule(const std::string& text, const KernelConfig& base) {
  auto number = [&](std::string_view s, auto& value) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
      throw ValidationError("bad number '" + std::string(s) + "' in multiscale schedule '" + text + "'");
    }
  };
  std::vector<ScaleStage> out;
  std::string_view rest(text);
  while (!rest.empty()) {
    const std::size_t semi = rest.find(';');
    const std::string_view item = rest.substr(0, semi);
    rest = semi == std::string_view::npos ? std::string_view() : rest.substr(semi + 1);
    if (item.find_first_not_of(' ') == std::string_view::npos) continue;
    const std::size_t comma = item.find(',');
    const std::size_t at = item.find('@');
    if (comma == std::string_view::npos || at == std::string_view::npos || at < comma) {
      throw ValidationError("multiscale stage must read 'sigma_e,sigma_f@iters': '" + std::string(item) + "'");
    }
    ScaleStage st;
    st.kernel = base;
    number(item.substr(0, comma), st.kernel.sigma_e);
    number(item.substr(comma + 1, at - comma - 1), st.kernel.sigma_f);
    number(item.substr(at + 1), st.iters);
    st.kernel.validate();
    if (st.iters < 0) throw ValidationError("stage iteration count must be nonnegative");
    out.push_back(st);
  }
  if (out.empty()) throw ValidationError("multiscale schedule is empty");
  return out;
}

}  // namespace fshapes

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include "json.hpp"
#include "pdegp/errors.hpp"
#include "pdegp/experiment.hpp"
#include "pdegp/svg.hpp"

namespace pdegp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<double> column(std::size_t c) const {
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r.at(c));
    return out;
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

// Numeric CSV with one header line; lines starting with '#' are skipped.
Table read_table(const fs::path& dir, const std::string& rel) {
  const fs::path p = dir / rel;
  if (!fs::exists(p)) throw InputError("run directory is missing " + rel);
  std::istringstream in(read_file(p.string()));
  Table t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (t.header.empty()) {
      t.header = split(line);
      continue;
    }
    std::vector<double> row;
    for (const auto& c : split(line)) {
      try {
        row.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw InputError(rel + ": non-numeric cell '" + c + "'");
      }
    }
    if (row.size() != t.header.size()) throw InputError(rel + ": ragged row");
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw InputError(rel + " is empty");
  return t;
}

std::map<std::string, double> read_metrics(const fs::path& dir) {
  const fs::path p = dir / "metrics.csv";
  if (!fs::exists(p)) throw InputError("run directory is missing metrics.csv");
  std::istringstream in(read_file(p.string()));
  std::map<std::string, double> out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto cells = split(line);
    if (cells.size() != 3) throw InputError("metrics.csv: malformed row");
    out[cells[1]] = std::stod(cells[2]);
  }
  return out;
}

bool is_marginal(const std::string& kind) { return kind.rfind("marginal", 0) == 0; }

class Writer {
 public:
  Writer(fs::path dir, bool svg) : dir_(std::move(dir)), svg_(svg) {}
  void csv(const std::string& name, const std::string& content) { put(name + ".csv", content); }
  void svg(const std::string& name, const std::string& content) {
    if (svg_) put(name + ".svg", content);
  }
  std::vector<std::string> written() const { return written_; }

 private:
  void put(const std::string& file, const std::string& content) {
    const std::string rel = "figures/" + file;
    write_file_atomic((dir_ / rel).string(), content);
    written_.push_back(rel);
  }
  fs::path dir_;
  bool svg_;
  std::vector<std::string> written_;
};

// Wide table: shared first column, one column per named 1D density.
void density_overlay(Writer& w, const fs::path& dir, const std::string& name,
                     const std::string& title, const std::vector<std::pair<std::string, std::string>>& files) {
  if (files.empty()) return;
  std::vector<Table> tables;
  for (const auto& f : files) tables.push_back(read_table(dir, f.second));
  std::ostringstream os;
  os << "theta1";
  for (const auto& f : files) os << "," << f.first;
  os << "\n";
  const auto n = tables[0].rows.size();
  for (const auto& t : tables) {
    if (t.rows.size() != n) throw InputError(name + ": densities on different grids");
  }
  std::vector<Series> series;
  for (std::size_t k = 0; k < files.size(); ++k) {
    series.push_back({files[k].first, tables[k].column(0), tables[k].column(1)});
  }
  for (std::size_t i = 0; i < n; ++i) {
    os << g(tables[0].rows[i][0]);
    for (const auto& t : tables) os << "," << g(t.rows[i][1]);
    os << "\n";
  }
  w.csv(name, os.str());
  w.svg(name, svg_lines(title, "theta1", "density", series));
}

void contour(Writer& w, const fs::path& dir, const std::string& label, const std::string& file) {
  const Table t = read_table(dir, file);
  if (t.header.size() != 3) throw InputError(file + " is not a 2D density");
  std::vector<double> xs, ys;
  for (const auto& r : t.rows) {
    if (xs.empty() || r[0] != xs.back()) xs.push_back(r[0]);
    if (xs.size() == 1) ys.push_back(r[1]);
  }
  if (xs.size() * ys.size() != t.rows.size()) throw InputError(file + " is not a full lattice");
  Mat z(xs.size(), ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < ys.size(); ++j) z(i, j) = t.rows[i * ys.size() + j][2];
  }
  // Matrix layout: rows follow theta2, columns follow theta1.
  std::ostringstream os;
  os << "theta2\\theta1";
  for (double x : xs) os << "," << g(x);
  os << "\n";
  for (std::size_t j = 0; j < ys.size(); ++j) {
    os << g(ys[j]);
    for (std::size_t i = 0; i < xs.size(); ++i) os << "," << g(z(i, j));
    os << "\n";
  }
  w.csv("contour_" + label, os.str());
  const Vec xv = Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  const Vec yv = Eigen::Map<const Vec>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  w.svg("contour_" + label, svg_heatmap(label, xv, yv, z));
}

// Curves of metric against the sweep value, one per (emulator, kind).
void sweep_curves(Writer& w, const std::string& name, const std::string& title,
                  const std::string& ylabel, const std::string& header,
                  const std::vector<std::tuple<std::string, std::string, double, double>>& pts,
                  bool log_y) {
  std::ostringstream os;
  os << header << "\n";
  std::map<std::string, Series> curves;
  std::vector<std::string> order;
  for (const auto& [series, key, x, y] : pts) {
    os << key << "," << g(x) << "," << g(y) << "\n";
    if (!curves.count(series)) {
      order.push_back(series);
      curves[series].name = series;
    }
    curves[series].x.push_back(x);
    curves[series].y.push_back(y);
  }
  w.csv(name, os.str());
  std::vector<Series> s;
  for (const auto& k : order) s.push_back(curves[k]);
  w.svg(name, svg_lines(title, "sweep value", ylabel, s, log_y));
}

void grid_report(Writer& w, const fs::path& dir, const json& m) {
  const auto metrics = read_metrics(dir);
  const int dim = m.at("dim_theta").get<int>();
  const bool has_truth = m.at("truth").contains("density");

  if (dim == 1) {
    std::vector<std::pair<std::string, std::string>> mean_f, marg_f;
    if (has_truth) {
      mean_f.push_back({"truth", m["truth"]["density"]});
      marg_f.push_back({"truth", m["truth"]["density"]});
    }
    for (const auto& v : m.at("variants")) {
      auto& dst = is_marginal(v.at("kind").get<std::string>()) ? marg_f : mean_f;
      dst.push_back({v.at("label").get<std::string>(), v.at("density").get<std::string>()});
    }
    density_overlay(w, dir, "mean_densities", "mean-based posteriors", mean_f);
    density_overlay(w, dir, "marginal_densities", "marginal posteriors", marg_f);
  } else {
    if (has_truth) contour(w, dir, "truth", m["truth"]["density"]);
    for (const auto& v : m.at("variants")) contour(w, dir, v.at("label"), v.at("density"));
  }

  std::vector<std::tuple<std::string, std::string, double, double>> hel, var;
  if (has_truth) {
    for (const auto& v : m.at("variants")) {
      const std::string label = v.at("label");
      const auto it = metrics.find("hellinger/" + label);
      if (it == metrics.end()) throw InputError("metrics.csv has no hellinger/" + label);
      const std::string series = v.at("emulator").get<std::string>() + "_" + v.at("kind").get<std::string>();
      hel.emplace_back(series, v.at("emulator").get<std::string>() + "," + v.at("kind").get<std::string>() + "," +
                                   v.at("parameter").get<std::string>(),
                       v.at("value").get<double>(), it->second);
    }
    sweep_curves(w, "hellinger", "Hellinger distance to the true posterior", "Hellinger",
                 "emulator,kind,parameter,value,hellinger", hel, true);
  }
  for (const auto& u : m.at("units")) {
    const std::string tag = u.at("unit");
    const auto it = metrics.find("avg_variance/" + tag);
    if (it == metrics.end()) throw InputError("metrics.csv has no avg_variance/" + tag);
    var.emplace_back(u.at("emulator").get<std::string>(),
                     u.at("emulator").get<std::string>() + "," + u.at("parameter").get<std::string>(),
                     u.at("value").get<double>(), it->second);
  }
  sweep_curves(w, "avg_variance", "average emulator variance", "variance",
               "emulator,parameter,value,avg_variance", var, true);
}

void mcmc_report(Writer& w, const fs::path& dir, const json& m) {
  const auto metrics = read_metrics(dir);
  const int dim = m.at("dim_theta").get<int>();
  std::vector<json> entries;
  if (m.at("truth").contains("chain")) entries.push_back(m["truth"]);
  for (const auto& v : m.at("variants")) entries.push_back(v);

  for (int a = 0; a < dim; ++a) {
    const std::string coord = "theta" + std::to_string(a + 1);
    std::vector<Table> hs;
    std::vector<Series> series;
    for (const auto& e : entries) {
      hs.push_back(read_table(dir, e.at("marginals").at(a).get<std::string>()));
      Series s;
      s.name = e.at("label");
      for (const auto& r : hs.back().rows) {
        s.x.push_back(0.5 * (r[0] + r[1]));
        s.y.push_back(r[2]);
      }
      series.push_back(std::move(s));
    }
    if (hs.empty()) continue;
    std::ostringstream os;
    os << "left,right";
    for (const auto& e : entries) os << "," << e.at("label").get<std::string>();
    os << "\n";
    for (std::size_t i = 0; i < hs[0].rows.size(); ++i) {
      os << g(hs[0].rows[i][0]) << "," << g(hs[0].rows[i][1]);
      for (const auto& h : hs) {
        if (h.rows.size() != hs[0].rows.size()) throw InputError("histograms use different bins");
        os << "," << g(h.rows[i][2]);
      }
      os << "\n";
    }
    w.csv("marginals_" + coord, os.str());
    w.svg("marginals_" + coord, svg_lines("marginal of " + coord, coord, "density", series));
  }

  std::ostringstream os;
  os << "label,emulator,kind";
  for (int a = 0; a < dim; ++a) os << ",mean_theta" << (a + 1) << ",sd_theta" << (a + 1);
  os << ",dist_to_dagger,acceptance,ess_min,step\n";
  for (const auto& e : entries) {
    const std::string label = e.at("label");
    auto get = [&](const std::string& key) {
      const auto it = metrics.find(key + "/" + label);
      if (it == metrics.end()) throw InputError("metrics.csv has no " + key + "/" + label);
      return g(it->second);
    };
    os << label << "," << e.at("emulator").get<std::string>() << "," << e.at("kind").get<std::string>();
    for (int a = 0; a < dim; ++a) {
      const std::string c = "theta" + std::to_string(a + 1);
      os << "," << get("mean_" + c) << "," << get("sd_" + c);
    }
    os << "," << get("dist_to_dagger") << "," << get("acceptance") << "," << get("ess_min") << ","
       << get("step") << "\n";
  }
  w.csv("summary", os.str());
  for (const auto& e : entries) {
    if (e.contains("density")) contour(w, dir, e.at("label"), e.at("density"));
  }
}

void error_report(Writer& w, const fs::path& dir, const json& m) {
  const fs::path p = dir / m.at("emulator_error").get<std::string>();
  if (!fs::exists(p)) throw InputError("run directory is missing emulator_error.csv");
  std::istringstream in(read_file(p.string()));
  std::string line;
  std::getline(in, line);
  // parameter -> value -> emulator -> rmse
  std::map<std::string, std::map<double, std::map<std::string, double>>> table;
  std::map<std::string, std::vector<std::string>> emulators;
  while (std::getline(in, line)) {
    const auto c = split(line);
    if (c.size() != 4) throw InputError("emulator_error.csv: malformed row");
    auto& names = emulators[c[1]];
    if (std::find(names.begin(), names.end(), c[0]) == names.end()) names.push_back(c[0]);
    table[c[1]][std::stod(c[2])][c[0]] = std::stod(c[3]);
  }
  for (const auto& [param, byval] : table) {
    const auto& names = emulators[param];
    std::ostringstream os;
    os << param;
    for (const auto& n : names) os << "," << n;
    os << "\n";
    std::vector<Series> series;
    for (const auto& n : names) series.push_back({n, {}, {}});
    for (const auto& [v, row] : byval) {
      os << g(v);
      for (std::size_t k = 0; k < names.size(); ++k) {
        const auto it = row.find(names[k]);
        const double r = it == row.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
        os << "," << g(r);
        series[k].x.push_back(v);
        series[k].y.push_back(r);
      }
      os << "\n";
    }
    w.csv("emulator_error_" + param, os.str());
    w.svg("emulator_error_" + param,
          svg_lines("emulator error against " + param, param, "rmse", series, true));
  }
}

}  // namespace

std::vector<std::string> make_report(const std::string& run_dir, bool svg) {
  const fs::path dir(run_dir);
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw InputError(run_dir + " has no manifest.json; not a run directory");
  json m;
  try {
    m = json::parse(read_file(mpath.string()));
  } catch (const json::exception& e) {
    throw InputError("manifest.json is not valid JSON: " + std::string(e.what()));
  }
  Writer w(dir, svg);
  try {
    const std::string study = m.at("study");
    if (study == "grid") {
      grid_report(w, dir, m);
    } else if (study == "mcmc") {
      mcmc_report(w, dir, m);
    } else if (study == "emulator_error") {
      error_report(w, dir, m);
    } else {
      throw InputError("manifest.json has unknown study '" + study + "'");
    }
  } catch (const json::exception& e) {
    throw InputError("manifest.json is incomplete: " + std::string(e.what()));
  }
  return w.written();
}

}  // namespace pdegp

#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ebhb/calibration.hpp"
#include "ebhb/errors.hpp"
#include "ebhb/mcmc.hpp"
#include "ebhb/mgps.hpp"
#include "ebhb/normal_means.hpp"
#include "ebhb/npmle.hpp"

namespace ebhb::io {

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::string_view what) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DomainError("cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
  return v;
}

inline std::uint64_t parse_count(std::string_view s, std::string_view what) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DomainError("cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
  return v;
}

/// Comma-separated table with a header row. Fields may be double-quoted.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return j;
    throw DomainError("CSV is missing column '" + std::string(name) + "'");
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw DomainError("unterminated quote in CSV line");
  out.push_back(std::move(field));
  return out;
}

inline CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (!have_header) {
      for (auto& f : fields) {
        while (!f.empty() && f.front() == ' ') f.erase(f.begin());
        while (!f.empty() && f.back() == ' ') f.pop_back();
      }
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw DomainError("CSV row has " + std::to_string(fields.size()) + " fields, header has " +
                        std::to_string(t.header.size()));
    t.rows.push_back(std::move(fields));
  }
  if (!have_header) throw DomainError("CSV input is empty");
  return t;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path);
  return read_csv(in);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// Observations from the `x` column.
inline NormalMeansData read_normal_means(const CsvTable& t, double sigma) {
  NormalMeansData d;
  d.sigma = sigma;
  const std::size_t col = t.column("x");
  for (const auto& r : t.rows) d.x.push_back(parse_double(r[col], "x"));
  d.validate();
  return d;
}

inline DrugEventTable read_drug_event_table(const CsvTable& t) {
  DrugEventTable table;
  const std::size_t cd = t.column("drug"), ce = t.column("event"), cn = t.column("n"), cx = t.column("e");
  for (const auto& r : t.rows) table.cells.push_back({r[cd], r[ce], parse_count(r[cn], "n"), parse_double(r[cx], "e")});
  table.validate();
  return table;
}

/// Covariate rows keyed by (drug, event), aligned to the table's cell order.
/// Every column other than drug and event is a covariate.
inline Eigen::MatrixXd read_covariates(const CsvTable& t, const DrugEventTable& table,
                                       std::vector<std::string>* names = nullptr) {
  const std::size_t cd = t.column("drug"), ce = t.column("event");
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < t.header.size(); ++j)
    if (j != cd && j != ce) {
      cols.push_back(j);
      if (names) names->push_back(t.header[j]);
    }
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    if (!index.emplace(std::make_pair(t.rows[i][cd], t.rows[i][ce]), i).second)
      throw DomainError("duplicate covariate row for " + t.rows[i][cd] + ", " + t.rows[i][ce]);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(table.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& cell = table.cells[i];
    const auto it = index.find({cell.drug, cell.event});
    if (it == index.end()) throw DomainError("no covariates for " + cell.drug + ", " + cell.event);
    for (std::size_t j = 0; j < cols.size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = parse_double(t.rows[it->second][cols[j]], "covariate");
  }
  return x;
}

/// Rows `role,estimate,variance` with role exp, obs or calib.
inline StudySet read_study_set(const CsvTable& t) {
  StudySet set;
  const std::size_t cr = t.column("role"), ce = t.column("estimate"), cv = t.column("variance");
  for (const auto& r : t.rows) {
    const StudyEstimate s{parse_double(r[ce], "estimate"), parse_double(r[cv], "variance")};
    if (r[cr] == "exp") {
      if (set.experiment) throw DomainError("more than one experimental study");
      set.experiment = s;
    } else if (r[cr] == "obs") {
      set.observational.push_back(s);
    } else if (r[cr] == "calib") {
      set.calibration.push_back(s);
    } else {
      throw DomainError("unknown study role '" + r[cr] + "'");
    }
  }
  set.validate();
  return set;
}

inline void write_prior_csv(std::ostream& os, const DiscretePrior& prior) {
  os << "atom,weight\n";
  for (std::size_t k = 0; k < prior.atoms.size(); ++k)
    os << format_double(prior.atoms[k]) << ',' << format_double(prior.weights[k]) << '\n';
}

inline void write_rule_csv(std::ostream& os, const ShrinkageRule& rule) {
  os << "grid,value,method_tag\n";
  for (std::size_t i = 0; i < rule.grid.size(); ++i)
    os << format_double(rule.grid[i]) << ',' << format_double(rule.values[i]) << ',' << to_string(rule.method_tag)
       << '\n';
}

/// Long format: draw,param,value.
inline void write_draws_csv(std::ostream& os, const PosteriorDraws& draws) {
  os << "draw,param,value\n";
  for (std::size_t r = 0; r < draws.rows(); ++r)
    for (std::size_t j = 0; j < draws.cols(); ++j)
      os << r + 1 << ',' << csv_field(draws.names()[j]) << ',' << format_double(draws.at(r, j)) << '\n';
}

}  // namespace ebhb::io

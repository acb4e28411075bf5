#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "exponentlab/scenario.hpp"

namespace exponentlab {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

template <class T>
T get_field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw ParseError(where + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + "." + key + ": " + e.what());
  }
}

inline LossRate parse_rate(const json& cell, const std::string& where) {
  if (cell.is_string()) {
    if (cell.get<std::string>() == "inf") return LossRate::infinite();
    throw ParseError(where + ": string loss entries must be \"inf\"");
  }
  if (!cell.is_number()) throw ParseError(where + ": loss entry must be a number or \"inf\"");
  return LossRate(cell.get<double>());
}

inline json dump_rate(LossRate r) {
  return r.is_infinite() ? json("inf") : json(r.value());
}

inline LossSpec parse_loss(const json& j, std::size_t rows, const std::string& where) {
  if (!j.is_array() || j.size() != rows)
    throw ParseError(where + ": loss must be an array of " + std::to_string(rows) + " rows");
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) throw ParseError(where + ": loss rows must be nonempty arrays");
  LossSpec loss(rows, cols);
  for (std::size_t m = 0; m < rows; ++m) {
    if (!j[m].is_array() || j[m].size() != cols)
      throw ParseError(where + ": loss rows must all have " + std::to_string(cols) + " entries");
    for (std::size_t d = 0; d < cols; ++d)
      loss.at(m, d) = parse_rate(j[m][d], where + "[" + std::to_string(m) + "][" +
                                              std::to_string(d) + "]");
  }
  return loss;
}

inline json dump_loss(const LossSpec& loss) {
  json rows = json::array();
  for (std::size_t m = 0; m < loss.hypotheses(); ++m) {
    json row = json::array();
    for (std::size_t d = 0; d < loss.decisions(); ++d) row.push_back(dump_rate(loss.at(m, d)));
    rows.push_back(row);
  }
  return rows;
}

inline std::vector<std::size_t> parse_source_refs(const json& j,
                                                  const std::vector<SourceModel>& sources,
                                                  const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": sources must be an array of ids");
  std::vector<std::size_t> out;
  for (const json& ref : j) {
    if (!ref.is_string()) throw ParseError(where + ": source ids must be strings");
    const std::string id = ref.get<std::string>();
    std::size_t k = 0;
    while (k < sources.size() && sources[k].id != id) ++k;
    if (k == sources.size()) throw ValidationError(where, "unknown source id '" + id + "'");
    out.push_back(k);
  }
  return out;
}

inline json dump_source_refs(const std::vector<std::size_t>& refs,
                             const std::vector<SourceModel>& sources) {
  json out = json::array();
  for (std::size_t k : refs) out.push_back(sources.at(k).id);
  return out;
}

}  // namespace detail

/// Parses and validates a scenario document.
inline Scenario scenario_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("scenario: top level must be an object");
  if (doc.contains("schema") && doc.at("schema") != kSchemaVersion)
    throw ParseError("scenario: unsupported schema version");

  Scenario sc;
  const json& hyp = doc.contains("hypotheses") ? doc.at("hypotheses") : json();
  sc.num_hypotheses = detail::get_field<std::size_t>(hyp, "M", "hypotheses");
  sc.priors = detail::get_field<std::vector<double>>(hyp, "priors", "hypotheses");

  if (!doc.contains("sources") || !doc.at("sources").is_array())
    throw ParseError("scenario: missing 'sources' array");
  for (const json& s : doc.at("sources")) {
    const auto id = detail::get_field<std::string>(s, "id", "sources[]");
    const auto kind = detail::get_field<std::string>(s, "kind", "sources[" + id + "]");
    if (kind == "gaussian") {
      sc.sources.push_back(SourceModel::gaussian(
          id, detail::get_field<std::vector<double>>(s, "means", "sources[" + id + "]"),
          detail::get_field<double>(s, "variance", "sources[" + id + "]")));
    } else if (kind == "finite") {
      sc.sources.push_back(SourceModel::finite(
          id, detail::get_field<std::vector<std::vector<double>>>(s, "probabilities",
                                                                   "sources[" + id + "]")));
    } else {
      throw ParseError("sources[" + id + "]: kind must be 'gaussian' or 'finite'");
    }
  }

  if (!doc.contains("agent0")) throw ParseError("scenario: missing 'agent0'");
  const json& a0 = doc.at("agent0");
  if (!a0.contains("sources") || !a0.contains("loss"))
    throw ParseError("agent0: needs 'sources' and 'loss'");
  sc.agent0.sources = detail::parse_source_refs(a0.at("sources"), sc.sources, "agent0.sources");
  sc.agent0.loss = detail::parse_loss(a0.at("loss"), sc.num_hypotheses, "agent0.loss");

  if (doc.contains("experts")) {
    if (!doc.at("experts").is_array()) throw ParseError("scenario: 'experts' must be an array");
    for (const json& e : doc.at("experts")) {
      Expert ex;
      ex.id = detail::get_field<int>(e, "id", "experts[]");
      const std::string where = "experts[" + std::to_string(ex.id) + "]";
      if (!e.contains("sources") || !e.contains("loss"))
        throw ParseError(where + ": needs 'sources' and 'loss'");
      ex.sources = detail::parse_source_refs(e.at("sources"), sc.sources, where + ".sources");
      ex.loss = detail::parse_loss(e.at("loss"), sc.num_hypotheses, where + ".loss");
      if (e.contains("d") && detail::get_field<std::size_t>(e, "d", where) != ex.decisions())
        throw ValidationError(where + ".d", "does not match the loss matrix width");
      ex.q = detail::get_field<double>(e, "q", where);
      ex.assumption4 = e.value("assumption4", false);
      sc.experts.push_back(std::move(ex));
    }
  }
  validate(sc);
  return sc;
}

inline json scenario_to_json(const Scenario& sc) {
  json doc;
  doc["schema"] = kSchemaVersion;
  doc["hypotheses"] = {{"M", sc.num_hypotheses}, {"priors", sc.priors}};
  json sources = json::array();
  for (const SourceModel& s : sc.sources) {
    if (s.kind == SourceKind::gaussian)
      sources.push_back({{"id", s.id}, {"kind", "gaussian"}, {"means", s.means},
                         {"variance", s.variance}});
    else
      sources.push_back({{"id", s.id}, {"kind", "finite"}, {"probabilities", s.probabilities}});
  }
  doc["sources"] = sources;
  doc["agent0"] = {{"sources", detail::dump_source_refs(sc.agent0.sources, sc.sources)},
                   {"loss", detail::dump_loss(sc.agent0.loss)}};
  json experts = json::array();
  for (const Expert& e : sc.experts) {
    json je = {{"id", e.id},
               {"sources", detail::dump_source_refs(e.sources, sc.sources)},
               {"d", e.decisions()},
               {"loss", detail::dump_loss(e.loss)},
               {"q", e.q}};
    if (e.assumption4) je["assumption4"] = true;
    experts.push_back(je);
  }
  doc["experts"] = experts;
  return doc;
}

inline Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  return scenario_from_json(doc);
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

inline void save_scenario(const Scenario& sc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write scenario file '" + path + "'");
  out << scenario_to_json(sc).dump(2) << '\n';
}

/// FNV-1a over the canonical JSON dump; identifies a scenario in reports.
inline std::string scenario_digest(const Scenario& sc) {
  const std::string text = scenario_to_json(sc).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xF];
  return out;
}

}  // namespace exponentlab

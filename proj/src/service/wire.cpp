#include "sylva/service/wire.hpp"

#include <cmath>

namespace sylva::service {

std::string to_string(CommandType t) {
  switch (t) {
    case CommandType::DefineSurvey: return "define_survey";
    case CommandType::Start: return "start";
    case CommandType::Interrupt: return "interrupt";
    case CommandType::Resume: return "resume";
    case CommandType::Push: return "push";
    case CommandType::SetParams: return "set_params";
  }
  return "start";
}

namespace {

double finite_number(const Json& j, const char* key, std::optional<std::int64_t> seq) {
  if (!j.contains(key)) throw WireError(std::string("missing field '") + key + "'", seq);
  const Json& v = j.at(key);
  if (!v.is_number()) throw WireError(std::string("field '") + key + "' must be a number", seq);
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw WireError(std::string("field '") + key + "' must be finite", seq);
  return d;
}

}  // namespace

Command command_from_json(const Json& j) {
  if (!j.is_object()) throw WireError("command must be a JSON object");
  std::optional<std::int64_t> seq;
  if (j.contains("seq")) {
    if (!j.at("seq").is_number_integer()) throw WireError("field 'seq' must be an integer");
    seq = j.at("seq").get<std::int64_t>();
  }
  if (!j.contains("type") || !j.at("type").is_string()) throw WireError("missing string field 'type'", seq);
  const std::string type = j.at("type").get<std::string>();
  Command c;
  c.seq = seq;
  if (j.contains("at") && !j.at("at").is_null()) {
    c.at = finite_number(j, "at", seq);
    if (*c.at < 0.0) throw WireError("field 'at' must be non-negative", seq);
  }
  if (j.contains("source") && j.at("source").is_string()) c.source = j.at("source").get<std::string>();
  if (type == "define_survey") {
    c.type = CommandType::DefineSurvey;
    try {
      c.survey = j.get<SurveyRequest>();
    } catch (const std::exception& e) {
      throw WireError(std::string("bad survey: ") + e.what(), seq);
    }
  } else if (type == "start") {
    c.type = CommandType::Start;
  } else if (type == "interrupt") {
    c.type = CommandType::Interrupt;
  } else if (type == "resume") {
    c.type = CommandType::Resume;
    if (!j.contains("goal") || !j.at("goal").is_number_integer()) {
      throw WireError("resume needs an integer 'goal'", seq);
    }
    c.goal = j.at("goal").get<int>();
  } else if (type == "push") {
    c.type = CommandType::Push;
    c.push_distance = finite_number(j, "distance", seq);
    c.push_heading = finite_number(j, "heading", seq);
  } else if (type == "set_params") {
    c.type = CommandType::SetParams;
    if (!j.contains("params") || !j.at("params").is_object()) {
      throw WireError("set_params needs an object 'params'", seq);
    }
    c.params = j.at("params");
  } else {
    throw WireError("unknown command type '" + type + "'", seq);
  }
  return c;
}

Command parse_command(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw WireError(std::string("malformed JSON: ") + e.what());
  }
  return command_from_json(j);
}

Json command_to_json(const Command& c) {
  Json j = {{"type", to_string(c.type)}};
  if (c.seq) j["seq"] = *c.seq;
  if (c.at) j["at"] = *c.at;
  j["source"] = c.source;
  switch (c.type) {
    case CommandType::DefineSurvey: {
      Json s = *c.survey;
      for (auto& [k, v] : s.items()) j[k] = v;
      break;
    }
    case CommandType::Resume: j["goal"] = c.goal; break;
    case CommandType::Push:
      j["distance"] = c.push_distance;
      j["heading"] = c.push_heading;
      break;
    case CommandType::SetParams: j["params"] = c.params; break;
    default: break;
  }
  return j;
}

Json make_message(const std::string& type, std::int64_t seq, double t, Json data) {
  return {{"type", type}, {"seq", seq}, {"t", t}, {"data", std::move(data)}};
}

}  // namespace sylva::service

// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpm_app/stroke_json.hpp"

#include <json.hpp>

#include "gpm/error.hpp"

namespace gpm::app {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument, where + ": " + what);
}

double number_at(const json& j, const std::string& where) {
  if (!j.is_number()) bad(where, "expected a number");
  return j.get<double>();
}

int integer_at(const json& j, const std::string& where) {
  if (!j.is_number_integer()) bad(where, "expected an integer");
  return j.get<int>();
}

}  // namespace

StrokeSet parse_stroke_set(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    bad("body", e.what());
  }
  if (!j.is_object()) bad("body", "expected an object");

  StrokeSet set;
  if (j.contains("base_index")) set.base_index = integer_at(j["base_index"], "base_index");
  if (!j.contains("strokes")) return set;
  if (!j["strokes"].is_array()) bad("strokes", "expected an array");

  const auto& arr = j["strokes"];
  for (std::size_t s = 0; s < arr.size(); ++s) {
    const std::string where = "strokes[" + std::to_string(s) + "]";
    const auto& js = arr[s];
    if (!js.is_object()) bad(where, "expected an object");
    if (!js.contains("image_index")) bad(where + ".image_index", "missing");
    if (!js.contains("points")) bad(where + ".points", "missing");
    Stroke st;
    st.image_index = integer_at(js["image_index"], where + ".image_index");
    if (js.contains("radius")) st.radius = number_at(js["radius"], where + ".radius");
    const auto& pts = js["points"];
    if (!pts.is_array()) bad(where + ".points", "expected an array");
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const std::string pw = where + ".points[" + std::to_string(k) + "]";
      if (!pts[k].is_array() || pts[k].size() != 2) bad(pw, "expected [x, y]");
      st.points.push_back({number_at(pts[k][0], pw + "[0]"), number_at(pts[k][1], pw + "[1]")});
    }
    set.strokes.push_back(std::move(st));
  }
  return set;
}

std::string stroke_set_to_json(const StrokeSet& set) {
  json j;
  j["base_index"] = set.base_index;
  j["strokes"] = json::array();
  for (const auto& st : set.strokes) {
    json pts = json::array();
    for (const auto& p : st.points) pts.push_back({p.x, p.y});
    j["strokes"].push_back({{"image_index", st.image_index}, {"radius", st.radius}, {"points", pts}});
  }
  return j.dump();
}

}  // namespace gpm::app

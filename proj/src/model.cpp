#include "limbdyn/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace limbdyn {

using nlohmann::json;

const char* anat_symbol_name(AnatSymbol s) {
  switch (s) {
    case AnatSymbol::X: return "x";
    case AnatSymbol::Y: return "y";
    case AnatSymbol::Z: return "z";
    case AnatSymbol::Alpha: return "alpha";
    case AnatSymbol::Beta: return "beta";
    case AnatSymbol::Gamma: return "gamma";
  }
  return "?";
}

const SegmentSpec& LimbChain::segment(const std::string& name) const {
  for (const auto& s : segments)
    if (s.name == name) return s;
  throw InputError("unknown segment: " + name);
}

int LimbChain::segment_index(const std::string& name) const {
  for (std::size_t i = 0; i < segments.size(); ++i)
    if (segments[i].name == name) return int(i);
  return -1;
}

namespace {

// Canonical per-joint slot layout of the model generalized coordinates.
// The elbow orders its translations z,x,y; every other joint z,y,x, and all
// coordinates except adduction/abduction flip sign on the non-elbow joints.
struct SlotTemplate {
  AnatSymbol symbol;
  int sign;
  const char* motion;
};

constexpr SlotTemplate kElbowSlots[6] = {
    {AnatSymbol::Z, +1, "proximal/distal"},
    {AnatSymbol::X, +1, "cranial/caudal"},
    {AnatSymbol::Y, +1, "medial/lateral"},
    {AnatSymbol::Beta, -1, "flexion/extension"},
    {AnatSymbol::Alpha, +1, "adduction/abduction"},
    {AnatSymbol::Gamma, -1, "internal/external"},
};

constexpr SlotTemplate kDistalSlots[6] = {
    {AnatSymbol::Z, -1, "proximal/distal"},
    {AnatSymbol::Y, -1, "medial/lateral"},
    {AnatSymbol::X, -1, "cranial/caudal"},
    {AnatSymbol::Beta, -1, "flexion/extension"},
    {AnatSymbol::Alpha, +1, "adduction/abduction"},
    {AnatSymbol::Gamma, -1, "internal/external"},
};

constexpr SlotTemplate kIdentitySlots[6] = {
    {AnatSymbol::X, +1, "cranial/caudal"},
    {AnatSymbol::Y, +1, "medial/lateral"},
    {AnatSymbol::Z, +1, "proximal/distal"},
    {AnatSymbol::Alpha, +1, "adduction/abduction"},
    {AnatSymbol::Beta, +1, "flexion/extension"},
    {AnatSymbol::Gamma, +1, "internal/external"},
};

const SlotTemplate* slots_for(const std::string& joint) {
  if (joint == "elbow") return kElbowSlots;
  if (joint == "carpus" || joint == "fetlock" || joint == "pastern" || joint == "coffin")
    return kDistalSlots;
  return kIdentitySlots;
}

}  // namespace

AnatomicalConvention default_convention(const std::vector<std::string>& joint_names) {
  AnatomicalConvention conv;
  int q = 1;
  for (const auto& joint : joint_names) {
    const SlotTemplate* slots = slots_for(joint);
    for (int k = 0; k < 6; ++k) {
      ConventionRow row;
      row.joint = joint;
      row.motion = slots[k].motion;
      row.symbol = slots[k].symbol;
      row.q_index = q++;
      row.coord_sign = slots[k].sign;
      row.torque_sign = slots[k].sign;
      row.power_sign = slots[k].sign;
      conv.rows.push_back(row);
    }
  }
  return conv;
}

std::vector<double> to_anatomical(const std::vector<double>& q,
                                  const AnatomicalConvention& convention) {
  if (q.size() != convention.rows.size())
    throw InputError("coordinate vector length " + std::to_string(q.size()) +
                     " does not match convention size " + std::to_string(convention.rows.size()));
  std::vector<double> a(q.size(), 0.0);
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto& row = convention.rows[i];
    const std::size_t joint = i / 6;
    const std::size_t slot = joint * 6 + std::size_t(row.symbol);
    // q = sign * symbol, so symbol = sign * q (sign is its own inverse)
    a[slot] = double(row.coord_sign) * q[i];
  }
  return a;
}

std::vector<double> from_anatomical(const std::vector<double>& a,
                                    const AnatomicalConvention& convention) {
  if (a.size() != convention.rows.size())
    throw InputError("coordinate vector length " + std::to_string(a.size()) +
                     " does not match convention size " + std::to_string(convention.rows.size()));
  std::vector<double> q(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& row = convention.rows[i];
    const std::size_t joint = i / 6;
    const std::size_t slot = joint * 6 + std::size_t(row.symbol);
    q[i] = double(row.coord_sign) * a[slot];
  }
  return q;
}

std::map<std::string, InertialParams> inertial_from_body_mass(
    double body_mass,
    const std::map<std::string, InertialCoefficients>& table,
    const std::map<std::string, double>& segment_lengths) {
  if (!(body_mass > 0.0)) throw InputError("body mass must be positive");
  std::map<std::string, InertialParams> out;
  for (const auto& [name, length] : segment_lengths) {
    auto it = table.find(name);
    if (it == table.end())
      throw InputError("no inertial coefficients for segment: " + name);
    const auto& c = it->second;
    if (c.mass_fraction < 0.0 || c.com_fraction < 0.0 || (c.gyration_fractions.array() < 0.0).any())
      throw InputError("inertial coefficients must be non-negative for segment: " + name);
    InertialParams p;
    p.mass = c.mass_fraction * body_mass;
    p.com_offset = Vec3(0, 0, -c.com_fraction * length);
    Vec3 r = c.gyration_fractions * length;
    p.inertia = Vec3(p.mass * r.x() * r.x(), p.mass * r.y() * r.y(), p.mass * r.z() * r.z())
                    .asDiagonal();
    out[name] = p;
  }
  return out;
}

namespace {

bool collinear(const std::vector<MarkerTemplatePoint>& pts) {
  if (pts.size() < 3) return true;
  // max cross-product area over point triples against the longest baseline
  const Vec3 a = pts[0].position;
  Vec3 dir = Vec3::Zero();
  double best = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    Vec3 d = pts[i].position - a;
    if (d.norm() > best) { best = d.norm(); dir = d; }
  }
  if (best < 1e-12) return true;
  dir.normalize();
  for (std::size_t i = 1; i < pts.size(); ++i) {
    Vec3 d = pts[i].position - a;
    if ((d - d.dot(dir) * dir).norm() > 1e-9 * std::max(1.0, best)) return false;
  }
  return true;
}

Vec3 parse_vec3(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3)
    throw InputError(what + " must be a 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

std::vector<MarkerTemplatePoint> parse_markers_obj(const json& j, const std::string& seg) {
  std::vector<MarkerTemplatePoint> pts;
  if (!j.is_object()) throw InputError("markers for " + seg + " must be an object");
  for (const auto& [label, pos] : j.items())
    pts.push_back({label, parse_vec3(pos, seg + " marker " + label)});
  std::sort(pts.begin(), pts.end(),
            [](const auto& a, const auto& b) { return a.label < b.label; });
  return pts;
}

}  // namespace

void validate_chain(const LimbChain& chain) {
  if (!(chain.body_mass > 0.0)) throw InputError("body_mass must be positive");
  if (chain.segments.empty()) throw InputError("chain has no segments");
  if (chain.segments.size() != chain.joints.size())
    throw InputError("segment count must equal joint count");

  std::set<std::string> names{chain.parent.name};
  for (const auto& s : chain.segments) {
    if (!names.insert(s.name).second)
      throw InputError("duplicate segment name: " + s.name);
    if (!(s.mass > 0.0)) throw InputError("segment " + s.name + ": mass must be positive");
    if (!(s.length > 0.0)) throw InputError("segment " + s.name + ": length must be positive");
    if ((s.inertia - s.inertia.transpose()).cwiseAbs().maxCoeff() > 1e-9)
      throw InputError("segment " + s.name + ": inertia tensor must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> eig(s.inertia);
    if (eig.eigenvalues().minCoeff() < -1e-9)
      throw InputError("segment " + s.name + ": inertia tensor must be positive semi-definite");
    if (s.marker_template.size() < 3)
      throw InputError("segment " + s.name + ": needs at least 3 template markers");
    if (collinear(s.marker_template))
      throw InputError("segment " + s.name + ": template markers are collinear");
  }
  if (chain.parent.marker_template.size() < 3 || collinear(chain.parent.marker_template))
    throw InputError("parent segment " + chain.parent.name +
                     ": needs at least 3 non-collinear template markers");

  std::set<std::string> joint_names;
  for (std::size_t i = 0; i < chain.joints.size(); ++i) {
    const auto& j = chain.joints[i];
    if (!joint_names.insert(j.name).second)
      throw InputError("duplicate joint name: " + j.name);
    const std::string expected_prox =
        i == 0 ? chain.parent.name : chain.segments[i - 1].name;
    if (j.proximal_segment != expected_prox || j.distal_segment != chain.segments[i].name)
      throw InputError("joint " + j.name +
                       ": chain must be a single open proximal-to-distal sequence "
                       "(expected " + expected_prox + " -> " + chain.segments[i].name + ")");
    for (int k = 0; k < 3; ++k) {
      if (std::abs(j.rotation_signs[k]) != 1.0 || std::abs(j.translation_signs[k]) != 1.0)
        throw InputError("joint " + j.name + ": sign entries must be +1 or -1");
    }
  }
  if (chain.convention.rows.size() != chain.joints.size() * 6)
    throw InputError("convention must hold 6 rows per joint");
}

LimbChain build_chain(const std::string& config_text) {
  json doc;
  try {
    doc = json::parse(config_text);
  } catch (const json::exception& e) {
    throw InputError(std::string("chain config: ") + e.what());
  }

  LimbChain chain;
  chain.name = doc.value("name", "chain");
  if (!doc.contains("body_mass_kg")) throw InputError("chain config: body_mass_kg missing");
  chain.body_mass = doc["body_mass_kg"].get<double>();

  if (!doc.contains("parent")) throw InputError("chain config: parent section missing");
  const auto& pj = doc["parent"];
  chain.parent.name = pj.value("name", "parent");
  if (pj.contains("socket_offset_m"))
    chain.parent.socket_offset = parse_vec3(pj["socket_offset_m"], "parent socket_offset_m");
  chain.parent.marker_template = parse_markers_obj(pj.at("markers"), chain.parent.name);

  std::map<std::string, InertialCoefficients> coeffs;
  if (doc.contains("inertial_coefficients")) {
    for (const auto& [name, cj] : doc["inertial_coefficients"].items()) {
      InertialCoefficients c;
      c.mass_fraction = cj.at("mass_fraction").get<double>();
      c.com_fraction = cj.at("com_fraction").get<double>();
      c.gyration_fractions = parse_vec3(cj.at("gyration_fractions"), name + " gyration_fractions");
      coeffs[name] = c;
    }
  }

  if (!doc.contains("segments")) throw InputError("chain config: segments missing");
  std::map<std::string, double> lengths;
  for (const auto& sj : doc["segments"]) {
    SegmentSpec s;
    s.name = sj.at("name").get<std::string>();
    s.length = sj.at("length_m").get<double>();
    s.marker_template = parse_markers_obj(sj.at("markers"), s.name);
    lengths[s.name] = s.length;
    chain.segments.push_back(s);
  }

  for (auto& s : chain.segments) {
    const auto& sj = *std::find_if(doc["segments"].begin(), doc["segments"].end(),
                                   [&](const json& j) { return j.at("name") == s.name; });
    if (sj.contains("mass_kg")) {
      s.mass = sj["mass_kg"].get<double>();
      if (sj.contains("com_offset_m")) s.com_offset = parse_vec3(sj["com_offset_m"], s.name + " com");
      if (sj.contains("inertia_diag_kgm2")) {
        Vec3 d = parse_vec3(sj["inertia_diag_kgm2"], s.name + " inertia");
        s.inertia = d.asDiagonal();
      }
    } else {
      if (coeffs.find(s.name) == coeffs.end())
        throw InputError("segment " + s.name + ": no mass_kg and no inertial coefficients");
      std::map<std::string, double> one{{s.name, s.length}};
      auto params = inertial_from_body_mass(chain.body_mass, coeffs, one);
      s.mass = params[s.name].mass;
      s.com_offset = params[s.name].com_offset;
      s.inertia = params[s.name].inertia;
    }
  }

  if (!doc.contains("joints")) throw InputError("chain config: joints missing");
  std::vector<std::string> joint_names;
  for (const auto& jj : doc["joints"]) {
    JointSpec j;
    j.name = jj.at("name").get<std::string>();
    j.proximal_segment = jj.at("proximal").get<std::string>();
    j.distal_segment = jj.at("distal").get<std::string>();
    if (jj.contains("center_offset_m"))
      j.center_offset = parse_vec3(jj["center_offset_m"], j.name + " center_offset_m");
    j.translations_enabled = jj.value("translations_enabled", false);
    if (jj.contains("rotation_signs"))
      j.rotation_signs = parse_vec3(jj["rotation_signs"], j.name + " rotation_signs");
    if (jj.contains("translation_signs"))
      j.translation_signs = parse_vec3(jj["translation_signs"], j.name + " translation_signs");
    const bool prox_known = j.proximal_segment == chain.parent.name ||
                            lengths.count(j.proximal_segment) > 0;
    if (!prox_known || lengths.count(j.distal_segment) == 0)
      throw InputError("joint " + j.name + " references undeclared segment");
    chain.joints.push_back(j);
    joint_names.push_back(j.name);
  }

  chain.convention = default_convention(joint_names);
  validate_chain(chain);
  return chain;
}

LimbChain build_chain_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open chain config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return build_chain(ss.str());
}

}  // namespace limbdyn

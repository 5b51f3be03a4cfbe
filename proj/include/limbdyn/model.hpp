#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "limbdyn/types.hpp"

namespace limbdyn {

/// Labeled reference point in a segment frame, m.
struct MarkerTemplatePoint {
  std::string label;
  Vec3 position = Vec3::Zero();
};

/// Rigid segment. The segment frame has its origin at the proximal joint
/// center with +z pointing proximally, so the bone runs from the origin to
/// (0, 0, -length). In the square-standing calibration pose every segment
/// frame is axis-aligned with the lab frame (x forward, y left, z up).
struct SegmentSpec {
  std::string name;
  double length = 0.0;           // m
  double mass = 0.0;             // kg
  Vec3 com_offset = Vec3::Zero(); // m, segment frame
  Mat3 inertia = Mat3::Zero();   // kg*m^2 about COM, segment frame
  std::vector<MarkerTemplatePoint> marker_template;
};

/// Kinematically tracked parent of the most proximal joint. It carries
/// markers and a socket point but no inertial role in the recursion.
struct ParentSpec {
  std::string name;
  Vec3 socket_offset = Vec3::Zero();  // proximal joint center in parent frame
  std::vector<MarkerTemplatePoint> marker_template;
};

/// Joint between consecutive segments. rotation_signs / translation_signs
/// map right-handed components about the distal segment axes to the
/// anatomical positive directions (flexion/adduction/internal positive,
/// cranial/medial/proximal positive). The elbow flexes against the
/// right-hand rule, hence its -1 on the y rotation.
struct JointSpec {
  std::string name;
  std::string proximal_segment;
  std::string distal_segment;
  Vec3 center_offset = Vec3::Zero();  // joint center in distal segment frame
  bool translations_enabled = false;
  Vec3 rotation_signs = Vec3::Ones();     // (alpha:x, beta:y, gamma:z)
  Vec3 translation_signs = Vec3::Ones();  // (x, y, z)
};

/// Anatomical coordinate symbols, in the canonical per-joint slot order
/// used by anatomical coordinate vectors.
enum class AnatSymbol { X = 0, Y = 1, Z = 2, Alpha = 3, Beta = 4, Gamma = 5 };

const char* anat_symbol_name(AnatSymbol s);

/// One row of the model-coordinate convention table: generalized model
/// coordinate q_{q_index} equals coord_sign times the anatomical symbol.
struct ConventionRow {
  std::string joint;
  std::string motion;     // e.g. "flexion/extension"
  AnatSymbol symbol = AnatSymbol::X;
  int q_index = 0;        // 1-based global index
  int coord_sign = 1;     // q = coord_sign * symbol
  int torque_sign = 1;
  int power_sign = 1;
};

/// Bidirectional sign/permutation map between the model generalized
/// coordinates (6 per joint) and anatomical coordinates.
struct AnatomicalConvention {
  std::vector<ConventionRow> rows;  // 6 per joint, model slot order
  std::size_t joint_count() const { return rows.size() / 6; }
};

struct LimbChain {
  std::string name;
  double body_mass = 0.0;  // kg
  ParentSpec parent;
  std::vector<SegmentSpec> segments;  // proximal -> distal
  std::vector<JointSpec> joints;      // joints[i] connects segments[i-1] (or parent) to segments[i]
  AnatomicalConvention convention;

  const SegmentSpec& segment(const std::string& name) const;
  int segment_index(const std::string& name) const;  // -1 if absent
};

/// Fractional inertial coefficients for one segment; masses and inertia
/// scale with body mass, COM and radii of gyration with segment length.
struct InertialCoefficients {
  double mass_fraction = 0.0;       // segment mass / body mass
  double com_fraction = 0.0;        // COM distance from proximal end / length
  Vec3 gyration_fractions = Vec3::Zero();  // radius of gyration / length, per axis
};

struct InertialParams {
  double mass = 0.0;
  Vec3 com_offset = Vec3::Zero();
  Mat3 inertia = Mat3::Zero();
};

/// Scale a body mass through a coefficient table. Keys must cover every
/// requested segment; lengths give the COM/inertia lever arms.
std::map<std::string, InertialParams> inertial_from_body_mass(
    double body_mass,
    const std::map<std::string, InertialCoefficients>& table,
    const std::map<std::string, double>& segment_lengths);

/// Default convention rows for the named joints, drawn from the canonical
/// five-joint table (elbow, carpus, fetlock, pastern, coffin). Joints not
/// in the canonical set get an identity mapping.
AnatomicalConvention default_convention(const std::vector<std::string>& joint_names);

/// Parse and validate a chain configuration document (JSON text).
LimbChain build_chain(const std::string& config_text);
LimbChain build_chain_file(const std::string& path);

/// Check every structural invariant; throws InputError on violation.
void validate_chain(const LimbChain& chain);

/// Map model generalized coordinates (6 per joint, model slot order) to
/// anatomical coordinates (per joint: x, y, z, alpha, beta, gamma).
std::vector<double> to_anatomical(const std::vector<double>& q,
                                  const AnatomicalConvention& convention);
std::vector<double> from_anatomical(const std::vector<double>& a,
                                    const AnatomicalConvention& convention);

}  // namespace limbdyn

#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dyntamp/kinematics.hpp"
#include "dyntamp/util.hpp"

namespace dyntamp::pred {

// ---------------------------------------------------------------------------
// Human trajectory sources
// ---------------------------------------------------------------------------

struct HumanPose {
  Eigen::Vector2d pelvis = Eigen::Vector2d::Zero();
  Eigen::Vector3d hand = Eigen::Vector3d::Zero();
  int carried = -1;  // object index into the workspace catalogue, -1 = none
};

struct HumanEvent {
  int t = 0;
  bool pick = true;  // false: place
  std::string object;
};

struct HumanSource {
  enum class Mode { kReplay, kDegraded, kHierarchical };
  Mode mode = Mode::kReplay;
  std::vector<HumanPose> poses;   // 10 Hz
  std::vector<HumanEvent> events; // attachment changes, sorted by t

  std::vector<Eigen::Vector2d> pelvis_track() const;
  int length() const { return static_cast<int>(poses.size()); }
};

// CSV contract: t,pelvis_x,pelvis_y,hand_x,hand_y,hand_z,carried
// where carried is the object's index in the scenario object list or -1.
HumanSource load_trajectory_csv(const std::string& path);
void save_trajectory_csv(const std::string& path, const HumanSource& src);

// Derives pick/place events from transitions of the carried column.
std::vector<HumanEvent> events_from_carried(const std::vector<HumanPose>& poses,
                                            const std::vector<kin::ObjectInfo>& objects);

// Removes one contiguous window of floor(fraction*T) samples (seeded uniform
// start) and bridges the gap with the low-level generator; length preserved.
HumanSource degrade_ground_truth(const HumanSource& gt, double fraction, uint64_t seed);

// ---------------------------------------------------------------------------
// High-level MDP over (object-class x location) counts
// ---------------------------------------------------------------------------

struct MdpSpec {
  std::vector<std::string> locations;
  struct ClassCounts {
    std::string name;
    std::vector<int> counts;  // per location
  };
  std::vector<ClassCounts> classes;
  int human_start = -1;  // location index; -1 = away
  int carry_start = -1;  // class index; -1 = empty-handed

  std::string to_json() const;
  static MdpSpec from_json(const std::string& text);
};

// counts[class * L + loc]; human_pos in [0, L] where L means "away";
// carry in [-1, C)
struct HLState {
  std::vector<int> counts;
  int human_pos = 0;
  int carry = -1;

  auto operator<=>(const HLState&) const = default;
};

struct HLAction {
  enum class Kind { kGoTo, kPickUp, kPlace };
  Kind kind = Kind::kPlace;
  int arg = 0;  // location index for go-to, class index for pick-up

  std::string str(const MdpSpec& spec) const;
};

class Mdp {
 public:
  Mdp(const MdpSpec& spec, const std::vector<HLState>& starts);

  const MdpSpec& spec() const { return spec_; }
  int n_states() const { return static_cast<int>(states_.size()); }
  int n_actions() const { return static_cast<int>(actions_.size()); }
  const HLState& state(int i) const { return states_[static_cast<size_t>(i)]; }
  const HLAction& action(int i) const { return actions_[static_cast<size_t>(i)]; }
  int state_index(const HLState& s) const;  // -1 when unknown
  // -1 when the action is illegal in s
  int next(int s, int a) const { return transitions_[static_cast<size_t>(s) * actions_.size() + static_cast<size_t>(a)]; }

  // One-hot feature vector per tuple component value.
  int n_features() const { return n_features_; }
  const Eigen::VectorXd& features(int s) const { return features_[static_cast<size_t>(s)]; }

  HLState initial_state() const;

 private:
  MdpSpec spec_;
  std::vector<HLState> states_;
  std::vector<HLAction> actions_;
  std::vector<int> transitions_;
  std::vector<Eigen::VectorXd> features_;
  std::map<HLState, int> index_;
  int n_features_ = 0;

  std::optional<HLState> apply(const HLState& s, const HLAction& a) const;
};

struct Episode {
  HLState start;
  std::vector<int> actions;  // action indices into the Mdp
};

// JSON demonstrations: {"episodes":[{"start":{...},"actions":["go-to table",...]}]}
std::vector<Episode> parse_demos(const std::string& text, const Mdp& mdp);
std::string demos_to_json(const std::vector<Episode>& demos, const Mdp& mdp);

// Scripted expert for synthesizing training demonstrations: ferries objects
// until each class reaches `goal_counts` at location 0, choosing fetch order
// by seed. Returns an episode ending at the goal.
Episode scripted_expert_episode(const Mdp& mdp, const HLState& start,
                                const std::map<std::string, int>& goal_counts,
                                uint64_t seed);

// ---------------------------------------------------------------------------
// Tabular MaxEnt IRL
// ---------------------------------------------------------------------------

struct IrlOptions {
  double discount = 0.95;
  double lr0 = 0.1;          // step size, decayed by 1/sqrt(1 + iter/decay_scale)
  double decay_scale = 100;  // iterations per decay unit
  int max_iters = 4000;
  double tol_gap = 1e-2;  // infinity-norm feature-count gap
  double vi_tol = 1e-9;
  int vi_max_sweeps = 4000;
};

struct IrlModel {
  MdpSpec spec;
  Eigen::VectorXd weights;
  double discount = 0.95;
  Eigen::MatrixXd policy;  // S x A, rows sum to 1 over legal actions
  bool converged = false;
  double gap = 0;
  int iterations = 0;

  std::string to_json() const;
  static IrlModel from_json(const std::string& text);
};

// Gradient ascent on the MaxEnt likelihood: soft value iteration under the
// current weights, expected feature visitations by a forward pass over each
// demonstration's horizon, weight update by (empirical - expected) counts.
IrlModel irl_fit(const Mdp& mdp, const std::vector<Episode>& demos,
                 const IrlOptions& opts = {});

// Recomputes the soft policy for a weight vector (used when loading models).
// v_inout, when given, warm-starts the soft value iteration and receives the
// converged values.
Eigen::MatrixXd soft_policy(const Mdp& mdp, const Eigen::VectorXd& weights,
                            double discount, double vi_tol = 1e-9,
                            int max_sweeps = 4000,
                            Eigen::VectorXd* v_inout = nullptr);

struct Rollout {
  std::vector<int> actions;
  bool reached_goal = false;
};

// Samples actions from the policy until the goal predicate holds or the step
// cap is hit; deterministic under a fixed seed.
Rollout rollout_policy(const IrlModel& model, const Mdp& mdp, const HLState& s0,
                       const std::function<bool(const HLState&)>& goal,
                       uint64_t seed, int step_cap = 100);

// ---------------------------------------------------------------------------
// Goal extraction and the low-level generator
// ---------------------------------------------------------------------------

struct SurfaceFullError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GoalContext {
  const kin::Workspace* ws = nullptr;
  Eigen::Vector2d pelvis = Eigen::Vector2d::Zero();
  Eigen::Vector3d hand = Eigen::Vector3d::Zero();
  int human_pos = -1;                 // location index into spec.locations
  const MdpSpec* spec = nullptr;
  double object_clearance = 0.15;     // free-point clearance on surfaces
  double stand_offset = 0.4;          // distance from the surface edge
};

// go-to: standing point at the surface edge nearest the human;
// pick-up: position of the nearest object of the class at the current
// location; place: closest free point on the current surface to the human.
Eigen::Vector3d extract_goal(const HLAction& action, const GoalContext& ctx);

// Nearest object of a class on a surface (tie-break by name); empty if none.
std::string resolve_pick_object(const kin::Workspace& ws, const std::string& cls,
                                const std::string& surface,
                                const Eigen::Vector3d& hand);

enum class SegmentKind { kPelvis, kHand };

// Goal-conditioned trajectory segment: the unconstrained minimizer of the
// quadratic smoothness objective with pinned endpoints (a uniform straight
// line), so the terminal error at the goal is exactly zero. Pelvis segments
// move the 2D base with the hand following; hand segments move the hand over
// a static base.
std::vector<HumanPose> generate_lowlevel(const HumanPose& now,
                                         const Eigen::Vector3d& goal,
                                         SegmentKind kind, int duration);

struct ComposeOptions {
  int go_to_steps = 30;
  int pick_steps = 5;
  int place_steps = 5;
  int step_cap = 200;
};

// Full hierarchical prediction: policy rollout, per-action goal extraction,
// low-level segments, concatenated with the induced pick/place schedule.
HumanSource compose_prediction(const IrlModel& model, const Mdp& mdp,
                               const kin::Workspace& ws,
                               const std::function<bool(const HLState&)>& goal,
                               uint64_t seed, const ComposeOptions& opts = {});

// Scripted human performing fetch tasks
// (used to author ground-truth fixtures without a learned policy).
struct HumanTask {
  std::string object;
  std::string to_surface;
};
HumanSource script_human(const kin::Workspace& ws, const std::vector<HumanTask>& tasks,
                         const Eigen::Vector2d& retreat_to,
                         const ComposeOptions& opts = {});

// High-level state implied by the workspace object placements (class counts
// per location plus the human's discretized position).
HLState state_from_workspace(const kin::Workspace& ws, const MdpSpec& spec);

}  // namespace dyntamp::pred

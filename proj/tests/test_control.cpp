#include <gtest/gtest.h>

#include "tdm/control.hpp"
#include "tdm/errors.hpp"
#include "tdm/oracle.hpp"

namespace tdm {
namespace {

// Model that predicts scale * g exactly, and an actor whose action echoes the
// goal, so a returned action identifies the chosen candidate.
struct ScaledGoalModel {
  double scale = 1.0;
  Eigen::MatrixXd predict(const Eigen::MatrixXd&, const Eigen::MatrixXd&, const Eigen::MatrixXd& g,
                          const std::vector<int>&) const {
    return scale * g;
  }
};

struct ConstantModel {
  Eigen::MatrixXd predict(const Eigen::MatrixXd&, const Eigen::MatrixXd&, const Eigen::MatrixXd& g,
                          const std::vector<int>&) const {
    return Eigen::MatrixXd::Zero(g.rows(), g.cols());
  }
};

struct EchoActor {
  Eigen::MatrixXd act(const Eigen::MatrixXd&, const Eigen::MatrixXd& g, const std::vector<int>& taus) const {
    Eigen::MatrixXd out(g.rows() + 1, g.cols());
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      out.col(j).head(g.rows()) = g.col(j);
      out(g.rows(), j) = taus[j];
    }
    return out;
  }
};

Box unit_box(int dim) { return {Eigen::VectorXd::Constant(dim, -1), Eigen::VectorXd::Constant(dim, 1)}; }

TEST(PlanningTau, RemainingTimeCappedByTauMax) {
  EXPECT_EQ(planning_tau(50, 0, 49), 49);
  EXPECT_EQ(planning_tau(50, 0, 24), 24);
  EXPECT_EQ(planning_tau(50, 40, 24), 9);
  EXPECT_EQ(planning_tau(50, 49, 24), 0);
}

TEST(TaskRewardTest, FixedComponentsOnly) {
  const TaskReward r = TaskReward::feature_target(Eigen::Vector3d(1, 2, 3), {0, 2});
  EXPECT_EQ(r.free_count(), 1);
  EXPECT_DOUBLE_EQ(r(Eigen::Vector3d(0, 100, 5)), -3.0);
  Eigen::MatrixXd m(3, 2);
  m << 0, 1, 100, -7, 5, 3;
  EXPECT_EQ(r.evaluate(m), Eigen::RowVector2d(-3.0, 0.0));
  EXPECT_THROW(TaskReward::feature_target(Eigen::Vector3d::Zero(), {3}), ShapeError);
}

TEST(TaskRewardTest, EnvironmentTaskComponents) {
  const TaskReward reacher = task_for(reacher2_spec(), Eigen::Vector4d(0.1, 0.2, 1, 1));
  EXPECT_EQ(reacher.free_count(), 2);
  EXPECT_FALSE(reacher.fixed[0]);
  EXPECT_TRUE(reacher.fixed[3]);
  EXPECT_EQ(task_for(point_mass_spec(), Eigen::Vector2d(0, 0)).free_count(), 0);
}

TEST(DirectPolicy, ReturnsActorOutput) {
  const EchoActor actor;
  const Eigen::VectorXd a = direct_policy(actor, Eigen::Vector2d(5, 5), Eigen::Vector2d(0.25, -0.5), 0);
  EXPECT_EQ(a, Eigen::Vector3d(0.25, -0.5, 0));
  EXPECT_THROW(direct_policy(actor, Eigen::Vector2d(5, 5), Eigen::Vector2d(0, 0), -1), std::invalid_argument);
}

TEST(ExplicitMpc, FullySpecifiedGoalReducesToDirectPolicy) {
  const ScaledGoalModel model;
  const EchoActor actor;
  const Eigen::Vector2d goal(0.3, -0.4);
  const TaskReward task = TaskReward::goal_reaching(goal);
  PlannerConfig cfg;
  cfg.candidates = 1024;
  Rng rng(1);
  const Eigen::VectorXd a = explicit_mpc(model, actor, Eigen::Vector2d::Zero(), task, 10, cfg, unit_box(2), rng);
  EXPECT_EQ(a, direct_policy(actor, Eigen::Vector2d::Zero(), goal, 9));
}

TEST(ExplicitMpc, UsesRemainingMinusOneAndCap) {
  const ScaledGoalModel model;
  const EchoActor actor;
  const TaskReward task = TaskReward::goal_reaching(Eigen::Vector2d::Zero());
  PlannerConfig cfg;
  Rng rng(2);
  EXPECT_EQ(explicit_mpc(model, actor, Eigen::Vector2d::Zero(), task, 7, cfg, unit_box(2), rng)(2), 6);
  cfg.tau_cap = 3;
  EXPECT_EQ(explicit_mpc(model, actor, Eigen::Vector2d::Zero(), task, 7, cfg, unit_box(2), rng)(2), 3);
  EXPECT_THROW(explicit_mpc(model, actor, Eigen::Vector2d::Zero(), task, 0, cfg, unit_box(2), rng),
               std::invalid_argument);
  cfg.candidates = 0;
  EXPECT_THROW(explicit_mpc(model, actor, Eigen::Vector2d::Zero(), task, 3, cfg, unit_box(2), rng),
               std::invalid_argument);
}

TEST(ExplicitMpc, MoreCandidatesNeverScoreWorse) {
  const ScaledGoalModel model;
  const EchoActor actor;
  const TaskReward task = TaskReward::feature_target(Eigen::Vector3d(0.2, 0.7, 0), {0, 1});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    double previous = -std::numeric_limits<double>::infinity();
    for (int n : {1, 4, 32, 1024}) {
      PlannerConfig cfg;
      cfg.candidates = n;
      Rng rng(seed);
      const Eigen::VectorXd a = explicit_mpc(model, actor, Eigen::Vector3d::Zero(), task, 5, cfg, unit_box(3), rng);
      const double score = task(Eigen::VectorXd(a.head(3)));
      EXPECT_GE(score, previous);
      previous = score;
    }
  }
}

TEST(ExplicitMpc, FreeComponentsSampledFromGoalBox) {
  const ScaledGoalModel model;
  const EchoActor actor;
  const TaskReward task = TaskReward::feature_target(Eigen::Vector2d(0.5, 0), {0});
  Box box{Eigen::Vector2d(-1, 2), Eigen::Vector2d(1, 3)};
  PlannerConfig cfg;
  cfg.candidates = 16;
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd a = explicit_mpc(model, actor, Eigen::Vector2d::Zero(), task, 5, cfg, box, rng);
    EXPECT_EQ(a(0), 0.5);
    EXPECT_GE(a(1), 2.0);
    EXPECT_LE(a(1), 3.0);
  }
}

TEST(ExplicitMpc, TiesGoToLowestIndex) {
  const ConstantModel model;
  const EchoActor actor;
  const TaskReward task = TaskReward::feature_target(Eigen::Vector2d(0.5, 0), {0});
  PlannerConfig cfg;
  cfg.candidates = 64;
  Rng rng(4), replay(4);
  const Eigen::VectorXd a = explicit_mpc(model, actor, Eigen::Vector2d::Zero(), task, 5, cfg, unit_box(2), rng);
  std::uniform_real_distribution<double> u(-1, 1);
  EXPECT_EQ(a(1), u(replay));
}

TEST(ExplicitMpc, PositiveScoreScalingKeepsChoice) {
  const EchoActor actor;
  const TaskReward task = TaskReward::feature_target(Eigen::Vector3d::Zero(), {0, 1});
  PlannerConfig cfg;
  cfg.candidates = 256;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng r1(seed), r2(seed);
    const Eigen::VectorXd a = explicit_mpc(ScaledGoalModel{1.0}, actor, Eigen::Vector3d::Zero(), task, 4, cfg,
                                           unit_box(3), r1);
    const Eigen::VectorXd b = explicit_mpc(ScaledGoalModel{37.5}, actor, Eigen::Vector3d::Zero(), task, 4, cfg,
                                           unit_box(3), r2);
    EXPECT_EQ(a, b);
  }
}

TEST(SkipK, FullSegmentEqualsExplicitMpc) {
  const ScaledGoalModel model;
  const EchoActor actor;
  const TaskReward task = TaskReward::feature_target(Eigen::Vector3d(0.1, 0, 0), {0});
  PlannerConfig cfg;
  cfg.candidates = 128;
  Rng r1(5), r2(5);
  const Eigen::VectorXd a = skip_k_plan(model, actor, Eigen::Vector3d::Zero(), task, 8, 8, cfg, unit_box(3), r1);
  const Eigen::VectorXd b = explicit_mpc(model, actor, Eigen::Vector3d::Zero(), task, 8, cfg, unit_box(3), r2);
  EXPECT_EQ(a, b);
}

TEST(SkipK, HorizonIsKMinusOneAndRangeChecked) {
  const ScaledGoalModel model;
  const EchoActor actor;
  const TaskReward task = TaskReward::goal_reaching(Eigen::Vector2d::Zero());
  PlannerConfig cfg;
  Rng rng(6);
  EXPECT_EQ(skip_k_plan(model, actor, Eigen::Vector2d::Zero(), task, 10, 3, cfg, unit_box(2), rng)(2), 2);
  EXPECT_THROW(skip_k_plan(model, actor, Eigen::Vector2d::Zero(), task, 10, 0, cfg, unit_box(2), rng),
               std::invalid_argument);
  EXPECT_THROW(skip_k_plan(model, actor, Eigen::Vector2d::Zero(), task, 10, 11, cfg, unit_box(2), rng),
               std::invalid_argument);
}

// One-step plans against an exact table on the chain walk straight to the goal.
TEST(SkipK, OneStepPlansOnExactChainTableApproachGoal) {
  const TabularMdp chain = make_chain(5);
  const TdmTable table = dp_solve(chain, 4);
  const TabularTdmModel model(chain, table);
  const Box box{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 4)};
  PlannerConfig cfg;
  Rng rng(7);
  for (int start = 0; start < 5; ++start) {
    for (int goal = 0; goal < 5; ++goal) {
      const Eigen::VectorXd g = chain.embedding.row(goal).transpose();
      const TaskReward task = TaskReward::goal_reaching(g);
      int s = start;
      for (int step = 0; step < 6; ++step) {
        const Eigen::VectorXd state = Eigen::VectorXd::Unit(5, s);
        const Eigen::VectorXd a = skip_k_plan(model, model, state, task, 10, 1, cfg, box, rng);
        Eigen::Index action;
        a.maxCoeff(&action);
        const int next = tabular_step(chain, s, static_cast<int>(action));
        if (s == goal)
          EXPECT_EQ(next, goal);
        else
          EXPECT_LT(chain.distance(next, goal), chain.distance(s, goal));
        s = next;
      }
      EXPECT_EQ(s, goal);
    }
  }
}

// A critic trained on one-hot chain features is near zero exactly on the
// cells whose goal is reachable within tau + 1 steps.
TEST(TabularCritic, NearZeroExactlyWhenReachable) {
  const TabularMdp chain = make_chain(5);
  const int tau_max = 4;
  NeuralTabularConfig cfg;
  cfg.steps = 20000;
  const TdmCritic critic = train_tabular_critic(chain, tau_max, cfg, 1);
  const TdmTable learned = critic_table(critic, chain, tau_max);
  for (int s = 0; s < 5; ++s)
    for (int a = 0; a < 3; ++a)
      for (int g = 0; g < 5; ++g)
        for (int tau = 0; tau <= tau_max; ++tau) {
          const bool reachable = chain.distance(tabular_step(chain, s, a), g) <= tau;
          EXPECT_EQ(std::abs(learned.at(s, a, g, tau)) < 0.05, reachable)
              << "s=" << s << " a=" << a << " g=" << g << " tau=" << tau;
        }
}

TEST(PolicyModeNames, RoundTrip) {
  for (auto m : {PolicyMode::kDirect, PolicyMode::kMpc, PolicyMode::kSkipK})
    EXPECT_EQ(parse_policy_mode(to_string(m)), m);
  EXPECT_ANY_THROW(parse_policy_mode("random"));
}

}  // namespace
}  // namespace tdm

import numpy as np
import pytest

from sonosim.geom import Pose, pose_error, rot_z
from sonosim.robot import (
    JOINT_NAMES,
    BacklashModel,
    ForceUnreachable,
    JointLimits,
    JointState,
    NotReachable,
    Robot,
    actuate,
    forward_kinematics,
    inverse_kinematics,
)
from sonosim.simworld import Wrench, build_phantom


@pytest.fixture(scope="module")
def world():
    return build_phantom(0)


class TestForwardKinematics:
    def test_home_is_identity(self):
        assert np.abs(forward_kinematics(JointState()).matrix() - np.eye(4)).max() == 0.0

    def test_radial_slide(self):
        pose = forward_kinematics(JointState(l=10))
        assert np.allclose(pose.translation, [10, 0, 0])
        assert np.allclose(pose.rotation, np.eye(3))

    def test_base_turn_with_slide(self):
        # Oracle: product of elementary homogeneous transforms.
        pose = forward_kinematics(JointState(l=10, theta=90))
        assert np.allclose(pose.translation, [0, 10, 0], atol=1e-12)
        assert np.allclose(pose.rotation, rot_z(np.pi / 2), atol=1e-12)

    def test_matches_homogeneous_product(self):
        from sonosim.geom import rot_x, rot_y

        rng = np.random.default_rng(1)
        lo, hi = JointLimits().lo_hi_arrays()
        for _ in range(50):
            j = JointState.from_array(rng.uniform(lo, hi))
            th, al, be, ga = (np.radians(getattr(j, n)) for n in ("theta", "alpha", "beta", "gamma"))

            def hom(R=np.eye(3), t=(0, 0, 0)):
                m = np.eye(4)
                m[:3, :3] = R
                m[:3, 3] = t
                return m

            ref = (
                hom(rot_z(th))
                @ hom(t=(j.l, 0, 0))
                @ hom(t=(0, 0, j.z))
                @ hom(rot_x(al))
                @ hom(rot_y(be))
                @ hom(rot_z(ga))
            )
            assert np.abs(forward_kinematics(j).matrix() - ref).max() < 1e-12


class TestInverseKinematics:
    def test_round_trip_500_targets(self):
        rng = np.random.default_rng(0)
        lo, hi = JointLimits().lo_hi_arrays()
        for _ in range(500):
            target = forward_kinematics(JointState.from_array(rng.uniform(lo, hi)))
            sol = inverse_kinematics(target, seed=JointState())
            trans, ang = pose_error(forward_kinematics(sol), target)
            assert trans <= 0.1 and ang <= 0.1
            assert JointLimits().contains(sol)

    def test_identity_from_zero_seed(self):
        sol = inverse_kinematics(Pose(np.eye(3), np.zeros(3)), seed=JointState())
        assert np.abs(sol.as_array()).max() < 1e-6

    def test_radius_beyond_limits_not_reachable(self):
        with pytest.raises(NotReachable) as err:
            inverse_kinematics(Pose(np.eye(3), [30.0, 0, 0]))
        assert err.value.joints is not None  # best effort is attached

    def test_seed_outside_limits_rejected(self):
        with pytest.raises(ValueError):
            inverse_kinematics(Pose(np.eye(3), np.zeros(3)), seed=JointState(l=20))


def random_walk_commands(rng, n=200, scale=0.1):
    lo, hi = JointLimits().lo_hi_arrays()
    span = hi - lo
    q = np.zeros(6)
    out = []
    for _ in range(n):
        q = np.clip(q + rng.normal(0, scale * span / 6), lo, hi)
        out.append(JointState.from_array(q))
    return out


class TestActuate:
    def test_zero_deadband_is_exact(self):
        model = BacklashModel.ideal()
        cmd = JointState(l=3.0, theta=25.0, z=-2.0, alpha=5.0, beta=-10.0, gamma=40.0)
        assert actuate(JointState(), cmd, model) == cmd

    def test_small_reversal_inside_deadband_no_motion(self):
        model = BacklashModel(deadband={"theta": 1.0}, regulator_enabled=False)
        s0 = JointState()
        s1 = actuate(s0, JointState(theta=10.0), model)
        assert s1.theta == pytest.approx(9.5)  # lags by half the play window
        s2 = actuate(s1, JointState(theta=9.5), model)
        assert s2.theta == s1.theta  # reversal of 0.5 deg absorbed

    def test_command_outside_limits_rejected(self):
        with pytest.raises(ValueError):
            actuate(JointState(), JointState(l=17.0), BacklashModel())

    def test_regulator_reduces_error_every_joint(self):
        rng = np.random.default_rng(7)
        cmds = random_walk_commands(rng)
        errors = {}
        for enabled in (False, True):
            model = BacklashModel(regulator_enabled=enabled)
            state = JointState()
            errs = np.zeros(6)
            for cmd in cmds:
                state = actuate(state, cmd, model)
                errs += np.abs(state.as_array() - cmd.as_array())
            errors[enabled] = errs / len(cmds)
        for k, name in enumerate(JOINT_NAMES):
            if name == "z":  # no regulator on the vertical slide
                assert errors[True][k] == pytest.approx(errors[False][k])
            else:
                assert errors[True][k] < errors[False][k]

    def test_error_nondecreasing_in_deadband(self):
        rng = np.random.default_rng(8)
        cmds = random_walk_commands(rng)
        prev = None
        for scale in (0.0, 0.5, 1.0, 2.0):
            model = BacklashModel(
                deadband={n: v * scale for n, v in BacklashModel().deadband.items()},
                regulator_enabled=False,
            )
            state = JointState()
            total = 0.0
            for cmd in cmds:
                state = actuate(state, cmd, model)
                total += np.abs(state.as_array() - cmd.as_array()).sum()
            if prev is not None:
                assert total >= prev - 1e-9
            prev = total

    def test_achieved_always_within_limits(self):
        rng = np.random.default_rng(9)
        model = BacklashModel()
        state = JointState()
        for cmd in random_walk_commands(rng, n=100, scale=0.3):
            state = actuate(state, cmd, model)
            assert JointLimits().contains(state)


class TestExecuteCartesian:
    def test_noop_at_current_state(self, world):
        robot = Robot(world)
        pose = robot.pose()
        wrench = robot.measure()
        joints, achieved, measured = robot.execute_cartesian(pose, wrench)
        assert pose_error(achieved, pose)[0] <= 0.1

    def test_three_newton_force_reaches_six_mm_penetration(self, world):
        robot = Robot(world)
        target = Pose(np.eye(3), [5.0, 0.0, -1.0])
        wrench = Wrench(force=[0, 0, 3.0], torque=[0, 0, 0])
        joints, achieved, measured = robot.execute_cartesian(target, wrench)
        assert measured.force[2] == pytest.approx(3.0, abs=0.2)
        assert achieved.translation[2] == pytest.approx(-6.0, abs=0.5)

    def test_huge_force_unreachable(self, world):
        robot = Robot(world)
        target = Pose(np.eye(3), [0.0, 0.0, -1.0])
        with pytest.raises(ForceUnreachable) as err:
            robot.execute_cartesian(target, Wrench(force=[0, 0, 50.0], torque=[0, 0, 0]))
        joints, pose, measured = err.value.achieved
        assert joints.z == pytest.approx(-8.0, abs=1e-6)  # pressed to the slide limit

    def test_unreachable_pose_carries_best_effort(self, world):
        robot = Robot(world)
        target = Pose(np.eye(3), [40.0, 0.0, -2.0])
        with pytest.raises(NotReachable) as err:
            robot.execute_cartesian(target, Wrench.zero())
        assert hasattr(err.value, "achieved")

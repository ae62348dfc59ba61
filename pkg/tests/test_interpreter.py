import math

import pytest

from deskbench.interpreter import (
    ApiRegistry,
    ExecutionInfo,
    ReturnTypeError,
    RuntimeApiError,
    execute_program,
)
from deskbench.policy import API_NAMES, parse_program
from deskbench.retrieval import AllExcluded


def stub_registry(**overrides):
    reg = ApiRegistry(env={"obs": object(), "BOUNDS": {"x": 1}})
    calls = []

    def make(name):
        def fn(*args, **kwargs):
            calls.append((name, args, kwargs))
            return 0
        return fn

    for name in API_NAMES:
        reg.register(name, make(name))
    reg.register("RobotExecution", lambda *a, **k: ExecutionInfo(success=True, actions_executed=1))
    for name, fn in overrides.items():
        reg.register(name, fn)
    reg._calls = calls
    return reg


def test_degrees_radians_arithmetic():
    captured = {}

    def pick_place(**kwargs):
        captured.update(kwargs)
        return "action"

    reg = stub_registry(PickPlace=pick_place)
    src = (
        "def main() -> dict:\n"
        "    angle = 0.5\n"
        "    yaw_angle = angle * 180 / np.pi\n"
        "    action = PickPlace(pick=loc, place=loc, bounds=BOUNDS, yaw_angle_degree=yaw_angle)\n"
        "    info = RobotExecution(action=action)\n"
        "    return info\n"
    )
    reg.env["loc"] = (1, 1)
    execute_program(parse_program(src), reg)
    assert captured["yaw_angle_degree"] == pytest.approx(28.6479, abs=1e-3)


def test_tuple_assignment_binds_two_names():
    reg = stub_registry(ImageCrop=lambda **k: (["a"], ["b"]))
    src = (
        "def main():\n"
        "    objs, masks = ImageCrop(image=obs, masks=obs)\n"
        "    info = RobotExecution(action=objs)\n"
        "    return info\n"
    )
    info = execute_program(parse_program(src), reg)
    assert info.success


def test_tuple_assignment_arity_mismatch():
    reg = stub_registry(ImageCrop=lambda **k: "not-a-tuple")
    src = (
        "def main():\n"
        "    objs, masks = ImageCrop(image=obs, masks=obs)\n"
        "    info = RobotExecution(action=objs)\n"
        "    return info\n"
    )
    with pytest.raises(RuntimeApiError) as err:
        execute_program(parse_program(src), reg)
    assert err.value.statement_index == 0


def test_extend_chain_flattens_action_lists():
    seen = {}

    def robot_execution(action):
        seen["action"] = action
        return ExecutionInfo(success=True, actions_executed=len(action))

    reg = stub_registry(
        DistractorActions=lambda **k: ["d1"],
        RearrangeActions=lambda **k: ["r1", "r2"],
        RobotExecution=robot_execution,
    )
    src = (
        "def main():\n"
        "    a1 = DistractorActions(mask_obs=obs, obj_list=obs)\n"
        "    a2 = RearrangeActions(pick_masks=obs, place_masks=obs, pick_ind=obs, place_ind=obs, bounds=BOUNDS)\n"
        "    actions = []\n"
        "    actions.extend(a1).extend(a2)\n"
        "    info = RobotExecution(action=actions)\n"
        "    return info\n"
    )
    info = execute_program(parse_program(src), reg)
    assert seen["action"] == ["d1", "r1", "r2"]
    assert info.actions_executed == 3


def test_cache_get_resolves_templates():
    reg = stub_registry(SAM=lambda image: [image])
    reg.cache_templates["scene"] = "SCENE"
    src = (
        "def main():\n"
        "    img = templates.get(\"scene\")\n"
        "    masks = SAM(image=img)\n"
        "    info = RobotExecution(action=masks)\n"
        "    return info\n"
    )
    assert execute_program(parse_program(src), reg).success


def test_cache_get_missing_key_is_api_error():
    reg = stub_registry()
    src = (
        "def main():\n"
        "    img = templates.get(\"scene\")\n"
        "    info = RobotExecution(action=img)\n"
        "    return info\n"
    )
    with pytest.raises(RuntimeApiError):
        execute_program(parse_program(src), reg)


def test_subscript_indexing():
    reg = stub_registry(CLIPRetrieval=lambda **k: 1)
    src = (
        "def main():\n"
        "    goal = CLIPRetrieval(objs=objs, query='the orange object')\n"
        "    crop = objs[goal]\n"
        "    info = RobotExecution(action=crop)\n"
        "    return info\n"
    )
    reg.env["objs"] = ["crop0", "crop1"]
    assert execute_program(parse_program(src), reg).success


def test_api_error_wrapped_with_statement_index_and_hook():
    fired = []

    def failing_retrieval(**kwargs):
        raise AllExcluded("all excluded")

    reg = stub_registry(CLIPRetrieval=failing_retrieval)
    reg.failure_hook = lambda: fired.append(True)
    src = (
        "def main():\n"
        "    image = GetObsImage(obs)\n"
        "    masks = SAM(image=image)\n"
        "    obj_0 = CLIPRetrieval(objs=masks, query='x')\n"
        "    info = RobotExecution(action=obj_0)\n"
        "    return info\n"
    )
    with pytest.raises(RuntimeApiError) as err:
        execute_program(parse_program(src), reg)
    assert err.value.statement_index == 2
    assert isinstance(err.value.cause, AllExcluded)
    assert fired == [True]


def test_return_must_be_execution_info():
    reg = stub_registry(RobotExecution=lambda **k: {"success": True})
    src = (
        "def main():\n"
        "    info = RobotExecution(action=obs)\n"
        "    return info\n"
    )
    with pytest.raises(ReturnTypeError):
        execute_program(parse_program(src), reg)


def test_interpreter_dispatch_bounded_by_statement_count():
    reg = stub_registry()
    src = (
        "def main():\n"
        "    a = GetObsImage(obs)\n"
        "    b = SAM(image=a)\n"
        "    info = RobotExecution(action=b)\n"
        "    return info\n"
    )
    p = parse_program(src)
    execute_program(p, reg)
    assert len(reg._calls) <= len(p.statements)


def test_execution_info_invariant():
    with pytest.raises(ValueError):
        ExecutionInfo(success=True, error={"kind": "boom"})

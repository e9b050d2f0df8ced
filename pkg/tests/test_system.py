import pytest

from speckernel import fixtures
from speckernel.lang import NULL, Int, StructuralError
from speckernel.syntax import parse_system
from speckernel.system import (
    label_check, refs, require_valid, store_update, syscall_refs, validate_system,
)


def _kinds(text):
    return {k for k, _ in validate_system(parse_system(text, validate=False)).violations}


@pytest.mark.parametrize("name", sorted(fixtures.SOURCES))
def test_fixtures_are_valid(name):
    assert validate_system(fixtures.system(name)).ok


def test_refs_follow_calls_and_syscalls():
    sys = fixtures.system("s_msg")
    # the hook is called through a register, so notify is a cap but not a ref
    assert syscall_refs(sys, "send") == {"buf"}
    assert sys.caps("send") == {"buf", "notify"}
    assert syscall_refs(sys, "recv") == {"buf"}
    p = fixtures.system("s_probe")
    assert syscall_refs(p, "probe") == {"tbl", "cfg"}
    assert refs(p, p.body("probe")) >= {"tbl", "cfg"}


def test_caps_must_cover_refs():
    src = "system { kernel array a[1]; syscall s() caps {} { load r <- a; } space user 1 kernel 2; }"
    assert "caps-missing" in _kinds(src)


def test_caps_must_be_kernel_objects():
    src = ("system { user array u[1]; kernel array a[1]; syscall s() caps {u} { skip; } "
           "space user 1 kernel 2; }")
    assert "caps-not-kernel" in _kinds(src)


def test_user_code_may_not_name_kernel_objects():
    src = ("system { kernel array a[1]; user proc p() { load r <- a; } "
           "syscall s() caps {} { skip; } space user 1 kernel 2; }")
    assert "privileged-user-code" in _kinds(src)


def test_space_overflow_and_dangling_names():
    assert "space-overflow" in _kinds(
        "system { kernel array a[3]; syscall s() caps {} { skip; } space user 1 kernel 2; }")
    assert "dangling" in _kinds(
        "system { kernel array a[1]; syscall s() caps {} { syscall t(); } space user 1 kernel 2; }")


def test_duplicate_declarations():
    assert "duplicate-id" in _kinds(
        "system { kernel array a[1]; kernel proc a() { skip; } syscall s() caps {} { skip; } "
        "space user 1 kernel 4; }")


def test_require_valid_raises():
    sys = parse_system("system { kernel array a[1]; syscall s() caps {} { load r <- a; } "
                       "space user 1 kernel 2; }", validate=False)
    with pytest.raises(StructuralError):
        require_valid(sys)


def test_label_check_passes_on_parser_output():
    for name in fixtures.SOURCES:
        assert label_check(fixtures.system(name)).ok


def test_store_initializers_and_update():
    sys = fixtures.system("s_msg")
    st = sys.store
    assert st.array("secret") == (Int(42), Int(7))
    assert st.array("buf") == (NULL,) * 4
    st2 = store_update(st, "buf", 2, Int(9))
    assert st2.array("buf")[2] == Int(9) and st.array("buf")[2] == NULL
    assert st2.agrees_on(st, ["secret", "notify"]) and not st2.agrees_on(st, ["buf"])
    with pytest.raises(StructuralError):
        store_update(st, "buf", 4, Int(0))
    with pytest.raises(StructuralError):
        store_update(st, "notify", 0, Int(0))

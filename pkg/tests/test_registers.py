import math

import pytest

from crxstream.regproto import RegisterFile, RegisterIndexError, make_pose


def test_banks_are_total():
    regs = RegisterFile()
    assert regs.get_r(200) == 0
    assert regs.get_pr(100) == (0.0,) * 6
    assert regs.get_di(1) is False


@pytest.mark.parametrize("bank,index", [("r", 0), ("r", 201), ("pr", 0), ("pr", 101),
                                        ("di", 0), ("di", 201)])
def test_out_of_range(bank, index):
    regs = RegisterFile()
    with pytest.raises(RegisterIndexError):
        getattr(regs, f"get_{bank}")(index)


def test_int32_bounds():
    regs = RegisterFile()
    regs.set_r(1, -(2**31))
    with pytest.raises(ValueError):
        regs.set_r(1, 2**31)


@pytest.mark.parametrize("bad", [[0.0] * 5, [0.0] * 7, [0.0] * 5 + [math.nan],
                                 [math.inf] + [0.0] * 5])
def test_pose_validation(bad):
    with pytest.raises(ValueError):
        make_pose(bad)
    with pytest.raises(ValueError):
        RegisterFile().set_pr(1, bad)


def test_pr_write_read():
    regs = RegisterFile()
    regs.set_pr(3, [1, 2, 3, 4, 5, 6])
    assert regs.get_pr(3) == (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)

import pytest
import torch

torch.set_num_threads(1)


@pytest.fixture(autouse=True)
def _seed():
    torch.manual_seed(0)


@pytest.fixture
def tiny_config():
    from jscclab.codec import CodecConfig

    # 16x16 images -> 8x8x8 then 4x4x16 tokens
    return CodecConfig(depths=(2, 2), widths=(8, 16), window=2, heads=(2, 2), variant="sa_ra", modnet_hidden=8)


ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record a one-line verdict for an acceptance criterion."""
    name = request.node.name.split("_")[1].upper()
    state = {"detail": "", "ok": False}

    def record(ok, detail):
        state["ok"], state["detail"] = bool(ok), detail
        return bool(ok)

    yield record
    ACCEPTANCE[name] = ("PASS" if state["ok"] else "FAIL", state["detail"])
    print(f"{name} {'PASS' if state['ok'] else 'FAIL'}: {state['detail']}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda n: int(n[1:])):
        verdict, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{name} {verdict}: {detail}")

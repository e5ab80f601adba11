import sys
from pathlib import Path

import pytest
from hypothesis import strategies as st

from hstdoc.hst import HstNode, HstTree, NodeKind
from hstdoc.layout_seq import LayoutDoc, LayoutEntity

FIXTURES = Path(__file__).parent / "fixtures"
SAMPLES = Path(__file__).parent.parent / "samples"

sys.path.insert(0, str(Path(__file__).parent))

_ALNUM = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
word = st.one_of(
    st.text(alphabet=_ALNUM, min_size=1, max_size=8),
    st.text(alphabet="表单姓名日期金额地址", min_size=1, max_size=4),
)
words = st.lists(word, min_size=1, max_size=4).map(" ".join)
# values may carry colons that are not followed by a space (times, ratios)
value_text = st.one_of(words, st.tuples(st.integers(0, 23), st.integers(0, 59)).map(lambda t: f"{t[0]}:{t[1]:02d}"))


@st.composite
def body_node(draw, depth, budget):
    with_kids = depth < 4 and budget[0] > 0 and draw(st.booleans())
    kids = ()
    if with_kids:
        n = draw(st.integers(1, 3))
        budget[0] -= n
        kids = tuple(draw(body_node(depth + 1, budget)) for _ in range(n))
    choice = draw(st.sampled_from(("kv", "key", "leaf")))
    if choice == "kv":
        return HstNode(NodeKind.KEY_VALUE, draw(words) + ":", kids, depth, draw(value_text))
    if choice == "key" or kids:
        return HstNode(NodeKind.KEY, draw(words) + ":", kids, depth)
    return HstNode(NodeKind.FREE_TEXT if depth == 0 else NodeKind.VALUE, draw(words), (), depth)


@st.composite
def hst_trees(draw, max_paragraphs=4, max_nodes=40):
    budget = [max_nodes]
    paras = []
    for p in range(draw(st.integers(0, max_paragraphs))):
        headerless = p == 0 and draw(st.booleans())
        n = draw(st.integers(1 if headerless else 0, 4))
        kids = tuple(draw(body_node(0, budget)) for _ in range(n))
        if headerless:
            paras.append(HstNode(NodeKind.HEADER, "", kids, 0, level=0))
        else:
            paras.append(HstNode(NodeKind.HEADER, draw(words), kids, 0, level=draw(st.integers(1, 6))))
    return HstTree(draw(words), tuple(paras))


@st.composite
def layout_docs(draw, max_entities=12):
    w = draw(st.integers(50, 3000))
    h = draw(st.integers(50, 3000))
    ents = []
    for _ in range(draw(st.integers(0, max_entities))):
        x1 = draw(st.integers(0, w - 2))
        y1 = draw(st.integers(0, h - 2))
        box = (x1, y1, draw(st.integers(x1 + 1, w)), draw(st.integers(y1 + 1, h)))
        text = draw(st.text(min_size=1, max_size=12).filter(lambda s: "\x00" not in s))
        ents.append(LayoutEntity(text, box))
    return LayoutDoc(w, h, tuple(ents), draw(st.sampled_from(("", "funsd", "synthetic"))))


def count_nodes(tree: HstTree) -> int:
    stack = list(tree.paragraphs)
    n = 0
    while stack:
        node = stack.pop()
        n += 1
        stack.extend(node.children)
    return n


@pytest.fixture
def sample_dir():
    return SAMPLES


def seed_cache(cfg, content: str, replies) -> None:
    """Store ``replies[k]`` as the recorded answer to attempt k of ``content``."""
    from hstdoc.endpoint import ReplayCache, request_payload, user_messages

    payload = request_payload(cfg, user_messages(content))
    cache = ReplayCache(cfg.replay_dir)
    for attempt, reply in enumerate(replies):
        cache.put(payload, reply, attempt)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)

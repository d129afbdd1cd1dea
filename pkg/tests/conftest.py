from __future__ import annotations

import json

import pytest

from harmkit.corpus import CATEGORY_ORDER, Category, Corpus, Sample
from harmkit.rulebase import Rule, RuleBase, add_rule


def make_sample(i: int, category: Category, text: str | None = None) -> Sample:
    return Sample(id=f"s{i}", text=text or f"文本{i}",
                  label=category, source="fixture")


def make_corpus(per_category: int, name: str = "fixture") -> Corpus:
    samples = []
    i = 0
    for cat in CATEGORY_ORDER:
        for _ in range(per_category):
            samples.append(make_sample(i, cat))
            i += 1
    return Corpus(name, samples)


@pytest.fixture
def small_rulebase() -> RuleBase:
    rb = RuleBase()
    rb = add_rule(rb, Rule(id="g1", category=Category.GAMBLING, ordinal=1,
                           title="术语", body="使用赌博行业术语，如时时彩。",
                           hint_terms=("时时彩", "接龙")),
                  timestamp="2025-01-01T00:00:00+00:00")
    rb = add_rule(rb, Rule(id="g2", category=Category.GAMBLING, ordinal=2,
                           title="网址", body="诱导点击的博彩网址。",
                           hint_terms=("红包接龙",)),
                  timestamp="2025-01-01T00:00:01+00:00")
    rb = add_rule(rb, Rule(id="p1", category=Category.PORNOGRAPHY, ordinal=1,
                           title="低俗暗示", body="低俗性暗示内容。",
                           hint_terms=("约炮",)),
                  timestamp="2025-01-01T00:00:02+00:00")
    rb = add_rule(rb, Rule(id="a1", category=Category.ABUSE, ordinal=1,
                           title="辱骂", body="人身攻击与辱骂。",
                           hint_terms=("辱骂",)),
                  timestamp="2025-01-01T00:00:03+00:00")
    rb = add_rule(rb, Rule(id="f1", category=Category.FRAUD, ordinal=1,
                           title="兼职诈骗", body="高佣金兼职诈骗。",
                           hint_terms=("高佣金",)),
                  timestamp="2025-01-01T00:00:04+00:00")
    rb = add_rule(rb, Rule(id="i1", category=Category.ILLICIT_ADS, ordinal=1,
                           title="刷单", body="低佣金招募闲散人员刷单。",
                           hint_terms=("刷单",)),
                  timestamp="2025-01-01T00:00:05+00:00")
    return rb


def write_jsonl(path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


# Deterministic, separable-by-construction corpus for student training:
# each category leans on its own keyword pool.
CATEGORY_KEYWORDS = {
    Category.GAMBLING: ["时时彩", "投注", "开盘", "下注", "赔率"],
    Category.PORNOGRAPHY: ["约炮", "一夜情", "裸聊", "上门服务", "原味"],
    Category.ABUSE: ["废物", "白痴", "恶心东西", "垃圾玩意", "蠢货"],
    Category.FRAUD: ["高佣金", "中奖了", "免费领", "刷流水", "转账验证"],
    Category.ILLICIT_ADS: ["日结", "刷单", "接码", "引流", "代实名"],
    Category.NON_VIOLATION: ["天气", "午饭", "电影", "旅行", "读书"],
}

_TEXT_TEMPLATES = [
    "今天聊聊{kw}的事情第{i}条",
    "朋友们来看看{kw}相关消息{i}",
    "有人了解{kw}吗第{i}次问",
    "{kw}的最新分享编号{i}",
    "关于{kw}大家怎么看{i}号帖",
]


def make_student_fixture(per_category: int, rb, seed: int = 0):
    """(records, texts_by_index) keyword-templated SFT fixture."""
    import random

    from harmkit.evaluate import build_detection_prompt
    from harmkit.synthgen import SftRecord

    rng = random.Random(seed)
    records = []
    for cat in CATEGORY_ORDER:
        pool = CATEGORY_KEYWORDS[cat]
        for i in range(per_category):
            template = rng.choice(_TEXT_TEMPLATES)
            text = template.format(kw=rng.choice(pool), i=i)
            prompt = build_detection_prompt(rb, text)
            records.append(SftRecord(input=prompt.text, target=cat.zh,
                                     provenance=f"fixture:{cat.canonical}:{i}"))
    return records

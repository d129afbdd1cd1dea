"""Attribute-driven synthetic data curation.

Scenario sampling over the attribute tables, generation-prompt construction,
teacher querying, refusal filtering, per-category dedup, balanced assembly,
and SFT export. Every stage is a pure, order-stable transformation over
immutable candidate lists, so a fixed seed plus the mock teacher reproduces
an export byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .corpus import CATEGORY_ORDER, Category
from .errors import DataValidationError, ShortfallError
from .evasion import EvasionStrategy, strategy_description
from .evaluate import build_detection_prompt
from .llmclient import ChatRequest, LlmClient
from .rulebase import RuleBase

GENERATION_TEMPLATE = """【角色设定】
你是一位经验丰富的互联网内容运营专家，擅长模仿不同群体的真实语言特征。请根据以下参数生成文本：

【用户画像】
- 性别：{gender}
- 年龄：{age}
- 职业：{occupation}
- 学历：{education}

【文本建模】
- 是否违规：{is_violation}
- 违规类别：{category}
- 违反规则：{rules}
- 文本长度：{length}字
- 叙事角度：{perspective}
- 发布平台：{platform}

【规避策略】
- 规避手段：{evasion}
- 说明：{evasion_description}

【生成要求】
请生成符合用户画像和文本建模要求的内容。如果使用了规避策略，请注意正确应用，以确保内容尽可能真实。请直接输出生成的文本。"""


@dataclass(frozen=True)
class AttributeTables:
    gender: tuple[str, ...]
    age: tuple[str, ...]
    occupation: tuple[str, ...]
    education: tuple[str, ...]
    text_length: tuple[str, ...]
    platform: tuple[str, ...]
    perspective: tuple[str, ...]
    evasion: tuple[str, ...]

    def __post_init__(self):
        for name in ("gender", "age", "occupation", "education", "text_length",
                     "platform", "perspective", "evasion"):
            if not getattr(self, name):
                raise DataValidationError(f"attribute table {name!r} is empty")

    @classmethod
    def from_json(cls, obj: dict) -> "AttributeTables":
        return cls(**{k: tuple(obj[k]) for k in (
            "gender", "age", "occupation", "education", "text_length",
            "platform", "perspective", "evasion")})

    @classmethod
    def load(cls, path: str | Path | None = None) -> "AttributeTables":
        if path is None:
            with resources.files("harmkit.data").joinpath(
                    "attribute_tables.json").open("r", encoding="utf-8") as fh:
                return cls.from_json(json.load(fh))
        try:
            return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
        except OSError as exc:
            raise DataValidationError(f"cannot read tables {path}: {exc}") from exc
        except (json.JSONDecodeError, KeyError) as exc:
            raise DataValidationError(f"tables {path}: {exc}") from exc


@dataclass(frozen=True)
class Persona:
    gender: str
    age: str
    occupation: str
    education: str


@dataclass(frozen=True)
class TextAttrs:
    length_range: str
    perspective: str
    platform: str


@dataclass(frozen=True)
class EvasionChoice:
    strategy: EvasionStrategy
    description: str


@dataclass(frozen=True)
class KnowledgeRef:
    rule_ids: tuple[str, ...]
    rendered: str


@dataclass(frozen=True)
class ScenarioSpec:
    category: Category
    persona: Persona
    text_attrs: TextAttrs
    evasion: EvasionChoice
    knowledge: KnowledgeRef
    seed: int

    def __post_init__(self):
        if self.category is Category.NON_VIOLATION:
            if self.knowledge.rule_ids:
                raise DataValidationError(
                    "non-violation scenarios carry no violated rules")
        elif not self.knowledge.rule_ids:
            raise DataValidationError(
                f"{self.category.canonical} scenario requires >= 1 violated rule")

    def to_json(self) -> dict:
        return {
            "category": self.category.canonical,
            "persona": vars(self.persona),
            "text_attrs": vars(self.text_attrs),
            "evasion": {"strategy": self.evasion.strategy.key,
                        "description": self.evasion.description},
            "knowledge": {"rule_ids": list(self.knowledge.rule_ids),
                          "rendered": self.knowledge.rendered},
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ScenarioSpec":
        return cls(
            category=Category.parse(obj["category"]),
            persona=Persona(**obj["persona"]),
            text_attrs=TextAttrs(**obj["text_attrs"]),
            evasion=EvasionChoice(
                strategy=EvasionStrategy.parse(obj["evasion"]["strategy"]),
                description=obj["evasion"]["description"]),
            knowledge=KnowledgeRef(
                rule_ids=tuple(obj["knowledge"]["rule_ids"]),
                rendered=obj["knowledge"]["rendered"]),
            seed=int(obj["seed"]),
        )


def derive_seed(base: int, *parts) -> int:
    """Stable child seed from a base seed and arbitrary labels."""
    payload = json.dumps([base, *parts], ensure_ascii=False).encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big") & 0x7FFFFFFF


def sample_scenario(category: Category, tables: AttributeTables,
                    rb: RuleBase, seed: int) -> ScenarioSpec:
    """Draws each attribute independently and uniformly from its table.

    Violation categories additionally draw 1-2 rules of that category as the
    violated knowledge. Deterministic per seed.
    """
    rng = random.Random(seed)
    persona = Persona(
        gender=rng.choice(tables.gender),
        age=rng.choice(tables.age),
        occupation=rng.choice(tables.occupation),
        education=rng.choice(tables.education),
    )
    text_attrs = TextAttrs(
        length_range=rng.choice(tables.text_length),
        perspective=rng.choice(tables.perspective),
        platform=rng.choice(tables.platform),
    )
    strategy = EvasionStrategy.parse(rng.choice(tables.evasion))
    evasion = EvasionChoice(strategy=strategy,
                            description=strategy_description(strategy))
    if category is Category.NON_VIOLATION:
        knowledge = KnowledgeRef(rule_ids=(), rendered="无")
    else:
        rules = rb.for_category(category)
        if not rules:
            raise DataValidationError(
                f"rule base has no rules for {category.canonical}")
        want = rng.randint(1, 2)
        chosen = rng.sample(rules, min(want, len(rules)))
        rendered = "\n".join(f"{i}. {r.body}" for i, r in enumerate(chosen, start=1))
        knowledge = KnowledgeRef(rule_ids=tuple(r.id for r in chosen),
                                 rendered=rendered)
    return ScenarioSpec(category=category, persona=persona,
                        text_attrs=text_attrs, evasion=evasion,
                        knowledge=knowledge, seed=seed)


def build_generation_prompt(spec: ScenarioSpec) -> str:
    """Byte-stable fill of the generation template from a scenario."""
    violation = spec.category is not Category.NON_VIOLATION
    return GENERATION_TEMPLATE.format(
        gender=spec.persona.gender,
        age=spec.persona.age,
        occupation=spec.persona.occupation,
        education=spec.persona.education,
        is_violation="违规" if violation else "不违规",
        category=spec.category.zh if violation else "不违规",
        rules=spec.knowledge.rendered,
        length=spec.text_attrs.length_range,
        perspective=spec.text_attrs.perspective,
        platform=spec.text_attrs.platform,
        evasion=spec.evasion.strategy.zh,
        evasion_description=spec.evasion.description,
    )


STATUS_RAW = "raw"
STATUS_FILTERED = "filtered"
STATUS_ACCEPTED = "accepted"
STATUS_FAILED = "failed"


@dataclass(frozen=True)
class Candidate:
    id: str
    scenario: ScenarioSpec
    prompt: str
    response: str
    teacher_id: str
    status: str = STATUS_RAW
    status_reason: str = ""

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "scenario": self.scenario.to_json(),
            "prompt": self.prompt,
            "response": self.response,
            "teacher_id": self.teacher_id,
            "status": self.status,
            "status_reason": self.status_reason,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Candidate":
        return cls(
            id=obj["id"],
            scenario=ScenarioSpec.from_json(obj["scenario"]),
            prompt=obj["prompt"],
            response=obj["response"],
            teacher_id=obj.get("teacher_id", ""),
            status=obj.get("status", STATUS_RAW),
            status_reason=obj.get("status_reason", ""),
        )


@dataclass
class GenConfig:
    model: str = "mock-teacher"
    temperature: float = 1.0  # generation default; top_k=1 mirrors it
    top_k: int | None = 1
    max_tokens: int = 512


def generate_candidates(specs: list[ScenarioSpec], client: LlmClient,
                        gen: GenConfig | None = None) -> list[Candidate]:
    """One candidate per scenario; per-spec provider failures are recorded on
    the candidate, never fatal. Responses pair with their scenarios by index
    regardless of completion order."""
    gen = gen or GenConfig()
    prompts = [build_generation_prompt(s) for s in specs]
    reqs = [ChatRequest(model=gen.model,
                        messages=[{"role": "user", "content": p}],
                        temperature=gen.temperature,
                        top_k=gen.top_k,
                        max_tokens=gen.max_tokens)
            for p in prompts]
    items = client.complete_batch(reqs)
    out: list[Candidate] = []
    for i, (spec, prompt, item) in enumerate(zip(specs, prompts, items)):
        cid = f"{spec.category.canonical}:{i:05d}:{spec.seed}"
        if item.ok:
            out.append(Candidate(id=cid, scenario=spec, prompt=prompt,
                                 response=item.result.text,
                                 teacher_id=gen.model))
        else:
            out.append(Candidate(id=cid, scenario=spec, prompt=prompt,
                                 response="", teacher_id=gen.model,
                                 status=STATUS_FAILED,
                                 status_reason=item.error or "provider error"))
    return out


class RefusalKeywords:
    """Refusal keyword lists: ASCII entries match case-insensitively, Chinese
    entries match exactly; all matching is substring."""

    def __init__(self, english: list[str], chinese: list[str]):
        if not english and not chinese:
            raise DataValidationError("refusal keyword list is empty")
        self.english = list(english)
        self.chinese = list(chinese)
        self._english_folded = [(kw, kw.lower()) for kw in self.english]

    @classmethod
    def load(cls, path: str | Path | None = None) -> "RefusalKeywords":
        if path is None:
            with resources.files("harmkit.data").joinpath(
                    "refusal_keywords.json").open("r", encoding="utf-8") as fh:
                doc = json.load(fh)
        else:
            try:
                doc = json.loads(Path(path).read_text(encoding="utf-8"))
            except OSError as exc:
                raise DataValidationError(f"cannot read keywords {path}: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise DataValidationError(f"keywords {path}: invalid JSON: {exc.msg}") from exc
        return cls(english=doc.get("english", []), chinese=doc.get("chinese", []))

    def first_match(self, text: str) -> str | None:
        lowered = text.lower()
        for kw, folded in self._english_folded:
            if folded in lowered:
                return kw
        for kw in self.chinese:
            if kw in text:
                return kw
        return None


def filter_refusals(cands: list[Candidate],
                    keywords: RefusalKeywords) -> list[Candidate]:
    """Marks raw candidates whose response contains a refusal keyword."""
    out = []
    for cand in cands:
        if cand.status == STATUS_RAW:
            hit = keywords.first_match(cand.response)
            if hit is not None:
                cand = replace(cand, status=STATUS_FILTERED, status_reason=hit)
        out.append(cand)
    return out


def dedup_candidates(cands: list[Candidate]) -> list[Candidate]:
    """Collapses byte-identical responses within a category to the first
    occurrence; duplicates are marked filtered with reason "duplicate"."""
    seen: dict[Category, set[bytes]] = {c: set() for c in Category}
    out = []
    for cand in cands:
        if cand.status == STATUS_RAW:
            key = cand.response.encode("utf-8")
            bucket = seen[cand.scenario.category]
            if key in bucket:
                cand = replace(cand, status=STATUS_FILTERED,
                               status_reason="duplicate")
            else:
                bucket.add(key)
        out.append(cand)
    return out


def assemble_dataset(cands: list[Candidate], n: int, seed: int) -> list[Candidate]:
    """Uniformly samples n surviving candidates per category and marks them
    accepted. Raises ShortfallError naming every deficient category."""
    if n <= 0:
        raise DataValidationError(f"n must be positive, got {n}")
    survivors: dict[Category, list[Candidate]] = {c: [] for c in CATEGORY_ORDER}
    for cand in cands:
        if cand.status == STATUS_RAW:
            survivors[cand.scenario.category].append(cand)
    present = [c for c in CATEGORY_ORDER if survivors[c]]
    deficits = {c.canonical: len(survivors[c]) for c in present
                if len(survivors[c]) < n}
    if deficits:
        raise ShortfallError(n, deficits)
    rng = random.Random(seed)
    accepted: list[Candidate] = []
    for cat in present:
        chosen = rng.sample(survivors[cat], n)
        accepted.extend(replace(c, status=STATUS_ACCEPTED) for c in chosen)
    return accepted


@dataclass(frozen=True)
class SftRecord:
    input: str
    target: str       # Chinese category label
    provenance: str   # candidate id

    def to_json(self) -> dict:
        return {"input": self.input, "target": self.target,
                "provenance": self.provenance}


def build_sft_records(accepted: list[Candidate], rb: RuleBase) -> list[SftRecord]:
    """Detection-prompt inputs pairing the rendered rule base with each
    accepted response; the target is the Chinese category label."""
    if not rb.rules:
        raise DataValidationError("SFT export requires a non-empty rule base")
    records = []
    for cand in accepted:
        if cand.status != STATUS_ACCEPTED:
            raise DataValidationError(
                f"candidate {cand.id} is {cand.status}, not accepted")
        prompt = build_detection_prompt(rb, cand.response)
        records.append(SftRecord(input=prompt.text,
                                 target=cand.scenario.category.zh,
                                 provenance=cand.id))
    return records


def export_sft(accepted: list[Candidate], rb: RuleBase,
               path: str | Path) -> int:
    records = build_sft_records(accepted, rb)
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False,
                                sort_keys=True) + "\n")
    return len(records)


def load_sft(path: str | Path) -> list[SftRecord]:
    records = []
    for lineno, line in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            records.append(SftRecord(input=obj["input"], target=obj["target"],
                                     provenance=obj.get("provenance", "")))
        except (json.JSONDecodeError, KeyError) as exc:
            raise DataValidationError(f"{path}:{lineno}: bad SFT record: {exc}") from exc
    return records


def save_candidates(cands: list[Candidate], path: str | Path) -> int:
    with Path(path).open("w", encoding="utf-8") as fh:
        for cand in cands:
            fh.write(json.dumps(cand.to_json(), ensure_ascii=False,
                                sort_keys=True) + "\n")
    return len(cands)


def load_candidates(path: str | Path) -> list[Candidate]:
    out = []
    for lineno, line in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(Candidate.from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError) as exc:
            raise DataValidationError(f"{path}:{lineno}: bad candidate: {exc}") from exc
    return out


def plan_scenarios(categories: list[Category], n: int, base_seed: int,
                   tables: AttributeTables, rb: RuleBase,
                   oversample: float = 1.3) -> list[ScenarioSpec]:
    """Scenario specs for a generation run: ceil(oversample * n) per category,
    with per-spec seeds derived stably from the base seed."""
    if oversample < 1.0:
        raise DataValidationError("oversample factor must be >= 1.0")
    per_cat = math.ceil(oversample * n)
    specs: list[ScenarioSpec] = []
    for cat in categories:
        for i in range(per_cat):
            child = derive_seed(base_seed, cat.canonical, i)
            specs.append(sample_scenario(cat, tables, rb, child))
    return specs

"""
Readout, update and attack runs over a simulated link, and their reports
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

from .auth import DeviceIdentity, FailureGuard
from .codec import CipherSuiteId
from .config import Settings
from .crypto import KEY_LEN, MasterKey, SeededEntropy
from .device import BmsDevice, Scenario
from .endpoints import DeviceEndpoint, Outcome, ReaderEndpoint, Request, Stage
from .fixtures import PackFixture
from .transport import (
    AdversaryConfig,
    AdversaryKind,
    Eavesdropper,
    FrameType,
    Link,
    link_create,
    plaintext_leak_scan,
)

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class AttackSpec:
    name: str
    threat: str
    countermeasure: str
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    wrong_key: bool = False
    escalate: bool = False


ATTACKS = {
    spec.name: spec
    for spec in (
        AttackSpec("eavesdrop", "eavesdropping on the RF channel", "encrypted channel",
                   AdversaryConfig(AdversaryKind.EAVESDROP)),
        AttackSpec("tamper", "channel data tampering", "MAC check",
                   AdversaryConfig(AdversaryKind.TAMPER_BIT, {"bit_offset": 37})),
        AttackSpec("replay", "replay through MitM manipulation", "counter",
                   AdversaryConfig(AdversaryKind.REPLAY, {"frame_index": 1})),
        AttackSpec("downgrade", "cipher suite downgrade", "MAC check",
                   AdversaryConfig(AdversaryKind.DOWNGRADE)),
        AttackSpec("drop", "denial of service", "NFC proximity (residual risk)",
                   AdversaryConfig(AdversaryKind.DROP, {"probability": 1.0})),
        AttackSpec("reflect", "reflection of the device challenge", "mutual authentication",
                   AdversaryConfig(AdversaryKind.REFLECT)),
        AttackSpec("impostor", "rogue reader without the master key", "mutual authentication",
                   wrong_key=True),
        AttackSpec("escalate", "unauthorized configuration write", "write limitation",
                   escalate=True),
    )
}

ESCALATION_WRITE = Request.update(0x0001, (1500).to_bytes(2, "big", signed=True))


@dataclass
class ScenarioReport:
    scenario: str
    outcome: Outcome
    suite: CipherSuiteId
    device_scenario: Scenario
    seed: int
    reason: Optional[str] = None
    stage: Optional[Stage] = None
    simulated_timing: dict = field(default_factory=dict)
    wall_clock_timing: dict = field(default_factory=dict)
    telemetry: Optional[dict] = None
    updates: list[dict] = field(default_factory=list)
    config_version: Optional[int] = None
    attack: Optional[dict] = None
    audit_log: list[dict] = field(default_factory=list)

    @property
    def succeeded(self) -> bool:
        return self.outcome is Outcome.SUCCESS

    def to_dict(self, include_wall_clock: bool = True) -> dict:
        report = {
            "scenario": self.scenario,
            "outcome": self.outcome.value,
            "reason": self.reason,
            "stage": self.stage.value if self.stage else None,
            "suite": self.suite.cli_name,
            "device_scenario": self.device_scenario.value,
            "seed": self.seed,
            "timing": {"simulated": self.simulated_timing},
            "telemetry": self.telemetry,
            "updates": self.updates,
            "config_version": self.config_version,
            "attack": self.attack,
            "audit_log": self.audit_log,
        }
        if include_wall_clock:
            report["timing"]["wall_clock"] = self.wall_clock_timing
        return report


@dataclass
class ScenarioRun:
    report: ScenarioReport
    link: Link
    reader: ReaderEndpoint
    device_endpoint: DeviceEndpoint

    @property
    def device(self) -> BmsDevice:
        return self.device_endpoint.device


def run_session(pack: PackFixture, identity: DeviceIdentity, *, suite: CipherSuiteId = CipherSuiteId.CBC_CMAC,
                scenario: Optional[Scenario] = None, seed: int = 0, settings: Optional[Settings] = None,
                plan: Optional[list[Request]] = None, adversaries: Optional[list[AdversaryConfig]] = None,
                wrong_key: bool = False, field_on: bool = True, name: str = "readout") -> ScenarioRun:
    """Run one reader contact against a fresh device until the link is idle"""
    settings = settings or Settings()
    suite = CipherSuiteId(suite)
    entropy = SeededEntropy(seed)

    device = pack.build_device(scenario=scenario, default_wake_latency_ms=settings.device.wake_latency_ms)
    guard = FailureGuard(threshold=settings.device.lockout_threshold, lockout_ms=settings.device.lockout_ms)
    device_endpoint = DeviceEndpoint(device, identity, suite, entropy.fork("device"), guard=guard)

    reader_identity = identity
    if wrong_key:
        wrong = MasterKey(entropy.fork("impostor").read(KEY_LEN))
        reader_identity = DeviceIdentity(identity.device_serial, wrong, identity.dev_add_data)
    if plan is None:
        plan = [Request.read() for _ in range(max(1, settings.reader.reads))]
    reader = ReaderEndpoint(
        reader_identity, suite, entropy.fork("reader"), plan=plan,
        response_timeout_ms=settings.reader.response_timeout_ms,
        max_retries=settings.reader.max_retries,
    )

    link = link_create(settings.link.latency_ms, list(adversaries or []), seed=seed,
                       max_events=settings.link.max_events)
    link.attach(reader, device_endpoint)
    LOGGER.info("Running %s: suite=%s device=%s seed=%d", name, suite.cli_name, device.scenario.value, seed)
    if field_on:
        link.field_set(True)
    reader.start(link)
    link.run_until_idle()

    report = ScenarioReport(
        scenario=name,
        outcome=reader.outcome,
        suite=suite,
        device_scenario=device.scenario,
        seed=seed,
        reason=reader.reason,
        stage=reader.stage,
        simulated_timing=reader.clock.simulated(),
        wall_clock_timing=reader.clock.wall_clock(),
        telemetry=reader.status.to_dict() if reader.status is not None else None,
        updates=list(reader.update_results),
        config_version=device.config.version,
        audit_log=[entry.to_dict() for entry in link.audit_log],
    )
    return ScenarioRun(report=report, link=link, reader=reader, device_endpoint=device_endpoint)


def run_readout(pack: PackFixture, identity: DeviceIdentity, **kwargs) -> ScenarioRun:
    return run_session(pack, identity, name="readout", **kwargs)


def run_update(pack: PackFixture, identity: DeviceIdentity, updates: list[tuple[int, bytes]],
               **kwargs) -> ScenarioRun:
    """Write each (key, value) pair, then read the status back"""
    plan = [Request.update(key, value) for key, value in updates] + [Request.read()]
    return run_session(pack, identity, plan=plan, name="update", **kwargs)


def accepted_duplicates(run: ScenarioRun) -> int:
    count = 0
    for endpoint in (run.reader, run.device_endpoint):
        wires = [message.wire for message in endpoint.accepted]
        counters = [message.counter for message in endpoint.accepted]
        count += len(wires) - len(set(wires))
        count += len(counters) - len(set(counters))
    return count


def accepted_modified(run: ScenarioRun) -> int:
    """Accepted messages whose wire bytes the peer never sealed"""
    count = 0
    for receiver, sender in ((run.reader, run.device_endpoint), (run.device_endpoint, run.reader)):
        sealed = set(sender.sealed_wire)
        count += sum(1 for message in receiver.accepted if message.wire not in sealed)
    return count


def leak_hits(run: ScenarioRun, window: int = 4) -> Optional[int]:
    eavesdropper = run.link.adversary(AdversaryKind.EAVESDROP)
    if not isinstance(eavesdropper, Eavesdropper) or run.reader.status_bytes is None:
        return None
    captured = eavesdropper.captured_bytes(exclude=(FrameType.AUTH1,))
    return len(plaintext_leak_scan(captured, run.reader.status_bytes, window))


def assess_attack(spec: AttackSpec, run: ScenarioRun, baseline_version: int) -> dict:
    modified = accepted_modified(run)
    duplicates = accepted_duplicates(run)
    contained = modified == 0 and duplicates == 0

    hits = None
    if spec.name == "eavesdrop":
        hits = leak_hits(run)
        contained = contained and hits == 0
    elif spec.name == "downgrade":
        contained = contained and not run.device_endpoint.accepted and not run.reader.accepted
    elif spec.name in ("reflect", "impostor"):
        contained = contained and run.device_endpoint.authenticated_count == 0
    elif spec.name == "escalate":
        contained = contained and run.device.config.version == baseline_version

    fired = sorted(set(run.reader.rejections) | set(run.device_endpoint.rejections))
    actions = [entry.adversary_action for entry in run.link.audit_log if entry.adversary_action]
    return {
        "name": spec.name,
        "threat": spec.threat,
        "countermeasure": spec.countermeasure,
        "contained": contained,
        "rejections": fired,
        "adversary_actions": actions,
        "accepted_modified": modified,
        "accepted_duplicates": duplicates,
        "plaintext_leak_hits": hits,
    }


def run_attack(name: str, pack: PackFixture, identity: DeviceIdentity, *,
               params: Optional[dict] = None, settings: Optional[Settings] = None, **kwargs) -> ScenarioRun:
    """Run one named attack; the report's ``attack`` entry says whether it was contained"""
    try:
        spec = ATTACKS[name]
    except KeyError:
        raise ValueError(f"Unknown attack '{name}'; choose from {', '.join(ATTACKS)}") from None

    settings = settings or Settings()
    adversary = spec.adversary
    params = dict(params or {})
    if adversary.kind is AdversaryKind.DOWNGRADE and "target_suite" not in params:
        suite = CipherSuiteId(kwargs.get("suite", CipherSuiteId.CBC_CMAC))
        params["target_suite"] = CipherSuiteId.GCM if suite is CipherSuiteId.CBC_CMAC else CipherSuiteId.CBC_CMAC
    if params:
        adversary = AdversaryConfig(adversary.kind, {**adversary.params, **params})
    adversaries = [] if adversary.kind is AdversaryKind.NONE else [adversary]

    plan = kwargs.pop("plan", None)
    if plan is None:
        reads = max(1, settings.reader.reads)
        if spec.name == "replay":
            reads = max(reads, 2)
        plan = [Request.read() for _ in range(reads)]
        if spec.escalate:
            plan = [Request.read(), ESCALATION_WRITE]

    baseline_version = pack.build_device().config.version
    run = run_session(pack, identity, settings=settings, plan=plan, adversaries=adversaries,
                      wrong_key=spec.wrong_key, name=f"attack:{spec.name}", **kwargs)
    run.report.attack = assess_attack(spec, run, baseline_version)
    LOGGER.info("Attack %s contained=%s", spec.name, run.report.attack["contained"])
    return run

"""Regenerate the recorded transcripts, golden diffs and bench manifests.

Each case is driven by an authored script of model answers; the run is recorded
so that tests can replay it with request-hash checking.  Run from anywhere:

    python tests/fixtures/make_goldens.py
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

from acrepair.cli import load_units
from acrepair.fsutil import atomic_write
from acrepair.llm import ScriptedProvider, Transcript
from acrepair.rbac import Taxonomy, TaxonomyStore
from acrepair.repair import COPILOT, CONFIRMED_INPUT, RepairCase, run_case

HERE = Path(__file__).resolve().parent
TRANSCRIPTS = HERE / "transcripts"
GOLDENS = HERE / "goldens"


def q3(patch: str, declarations: str = "", mechanism: str = "") -> str:
    body = {"patch": patch}
    if declarations:
        body["declarations"] = declarations
    if mechanism:
        body["mechanism"] = mechanism
    return json.dumps(body, indent=1)


ACCEPT = '{"verdict": "accept", "reason": "Only the intended role can call the function and the logic is unchanged."}'

GYM_FN = """function depositFromOtherContract(uint256 _depositAmount, uint8 _periodId,
        bool isUnlocked, address _from
    ) external onlyBank {
        require(isPoolActive,'Not running yet');
        _autoDeposit(_depositAmount,_periodId,isUnlocked,_from);
    }"""

EXECUTE_FN = """function execute(address target, bytes calldata data) external onlyAdmin returns (bytes memory) {
        (bool ok, bytes memory ret) = target.call(data);
        require(ok, "Executor: call failed");
        executions += 1;
        emit Executed(target, data);
        return ret;
    }"""

INIT_FN = """function initWallet(address _owner, uint256 _limit) public {
        require(msg.sender == deployer, "WalletLibrary: not deployer");
        require(!initialized, "WalletLibrary: already initialized");
        owner = _owner;
        dailyLimit = _limit;
        initialized = true;
    }"""

MINT_FN = """function mint(address to, uint256 amount) external onlyMinter {
        balanceOf[to] += amount;
        totalSupply += amount;
        emit Transfer(address(0), to, amount);
    }"""

MINT_DECLS = """address public minter;

constructor() {
    minter = msg.sender;
}

modifier onlyMinter() {
    require(msg.sender == minter, "RewardToken: not minter");
    _;
}"""

FEE_FN_STRICT = """function setFee(uint256 newFeeBps) external onlyOwner {
        require(newFeeBps <= 100, "FeeManager: fee too high");
        feeBps = newFeeBps;
    }"""

FEE_FN = """function setFee(uint256 newFeeBps) external onlyOwner {
        require(newFeeBps <= 1000, "FeeManager: fee too high");
        feeBps = newFeeBps;
    }"""

PAUSE_FN = """function pause() external {
        require(msg.sender == owner, "Market: not owner");
        paused = true;
    }"""

PRICE_FN = """function setPrice(uint256 newPrice) external {
        require(hasRole(ORACLE_ROLE, msg.sender), "PriceFeed: not oracle");
        price = newPrice;
        updatedAt = block.timestamp;
    }"""

WITHDRAW_FN = """function withdrawTo(address payable to, uint256 amount) external onlyOwner {
        require(amount <= reserves, "Treasury: insufficient reserves");
        reserves -= amount;
        to.transfer(amount);
    }"""

RATE_FN = """function setInterestRate(uint256 rate) external onlyOwner {
        require(rate <= 50, "LendingPool: rate too high");
        interestRate = rate;
    }"""

REGISTER_BAD = """function register(bytes32 key, address value) external onlyGovernance {
        entries[key] = value;
    }"""

# id -> case definition; "bench" marks membership in the ten-case mini benchmark
CASES: dict[str, dict] = {
    "gymvault": {
        "sources": ["cases/gymvault/GymVault.sol"],
        "function": "GymVault.depositFromOtherContract",
        "description": "depositFromOtherContract lets any caller deposit on behalf of an arbitrary _from address.",
        "expectedPair": ["Bank", "Deposit"],
        "script": [
            '{"elements": ["onlyBank", "onlyOwner"], "reason": "onlyBank guards the bank address and onlyOwner guards administration."}',
            '{"role": "Vault/Bank", "permission": "Deposit", "is_new": false, "reason": "Deposits on behalf of users are made by the bank contract."}',
            q3(GYM_FN, mechanism="reusedModifier"),
            ACCEPT,
        ],
    },
    "executor": {
        "sources": ["cases/executor/Executor.sol"],
        "function": "Executor.execute",
        "description": "execute forwards arbitrary low-level calls for any caller.",
        "expectedPair": ["Admin", "Low-level call"],
        "script": [
            '{"elements": ["onlyAdmin", "admin", "setAdmin"]}',
            '{"role": "Admin", "permission": "Low-level call", "is_new": true, "checks": ["require(msg.sender == admin)"], "reason": "Arbitrary calls are an administrative capability."}',
            q3(EXECUTE_FN, mechanism="reusedModifier"),
            ACCEPT,
        ],
    },
    "wallet": {
        "sources": ["cases/wallet/WalletLibrary.sol"],
        "function": "WalletLibrary.initWallet",
        "description": "initWallet can be called again by anyone to take over the wallet.",
        "expectedPair": ["Owner of the contract", "Initialization"],
        "script": [
            '```json\n{"elements": ["owner", "deployer"]}\n```',
            'role: Owner of the contract\npermission: Initialization\nis_new: false',
            q3(INIT_FN, mechanism="inlineRequire"),
            ACCEPT,
        ],
    },
    "rewardtoken": {
        "sources": ["cases/rewardtoken/RewardToken.sol"],
        "function": "RewardToken.mint",
        "description": "mint has no access control, so anyone can inflate the supply.",
        "expectedPair": ["Minter", "Mint"],
        "script": [
            # no RBAC candidates: Q1 is skipped
            '{"role": "Minter", "permission": "Mint", "is_new": false}',
            q3(MINT_FN, MINT_DECLS, "newModifier"),
            ACCEPT,
        ],
    },
    "feemanager": {
        "sources": ["cases/feemanager/FeeManager.sol"],
        "function": "FeeManager.setFee",
        "description": "setFee can be changed by anyone.",
        "expectedPair": ["Admin", "Adjust fees"],
        "script": [
            '{"elements": ["onlyOwner", "owner"]}',
            '{"role": "Admin", "permission": "Adjust fees", "is_new": false}',
            q3(FEE_FN_STRICT),
            '{"verdict": "reject", "reason": "The patch lowers the fee cap from 1000 to 100, which changes legitimate behaviour.", "category": "logicConflict"}',
            q3(FEE_FN),
            ACCEPT,
        ],
    },
    "pausable": {
        "sources": ["cases/pausable/Market.sol"],
        "function": "Market.pause",
        "description": "pause can be triggered by any account, freezing the market.",
        "expectedPair": ["Owner of the contract", "Pause contract"],
        "script": [
            '{"elements": ["onlyOwner", "owner"]}',
            '{"role": "Owner of the contract", "permission": "Pause contract", "is_new": false}',
            q3(PAUSE_FN, mechanism="inlineRequire"),
            ACCEPT,
        ],
    },
    "pricefeed": {
        "sources": ["cases/pricefeed/PriceFeed.sol"],
        "function": "PriceFeed.setPrice",
        "description": "setPrice is callable by anyone, so the price can be manipulated.",
        "expectedPair": ["Admin", "Manipulate price"],
        "script": [
            '{"elements": ["grantRole", "_roles", "ADMIN_ROLE", "ORACLE_ROLE"]}',
            '{"role": "Admin", "permission": "Manipulate price", "is_new": false}',
            q3(PRICE_FN),
            ACCEPT,
        ],
    },
    "treasury": {
        "sources": ["cases/treasury/Treasury.sol"],
        "function": "Treasury.withdrawTo",
        "description": "withdrawTo sends reserves to any address for any caller.",
        "expectedPair": ["Vault/Bank", "Withdrawal"],
        "script": [
            '{"elements": ["onlyOwner", "owner"]}',
            '{"role": "Vault/Bank", "permission": "Withdrawal", "is_new": false}',
            q3(WITHDRAW_FN),
            '{"verdict": "reject", "reason": "Reserves should also be withdrawable by the treasury manager.", "category": "incorrectRole"}',
            q3(WITHDRAW_FN),
            '{"verdict": "reject", "reason": "Same concern as before.", "category": "incorrectRole"}',
            q3(WITHDRAW_FN),
            '{"verdict": "reject", "reason": "Still restricted to the owner only.", "category": "incorrectRole"}',
            q3(WITHDRAW_FN),
            '{"verdict": "reject", "reason": "Unchanged.", "category": "other"}',
        ],
    },
    "lendingpool": {
        "sources": ["cases/lendingpool/LendingPool.sol"],
        "function": "LendingPool.setInterestRate",
        "description": "setInterestRate can be called by anyone.",
        "expectedPair": ["Vault/Bank", "Set interest rates"],
        "script": [
            '{"elements": ["onlyOwner", "owner"]}',
            # a plausible but wrong pair: the bench scores this case as not successful
            '{"role": "Admin", "permission": "Adjust fees", "is_new": false}',
            q3(RATE_FN),
            ACCEPT,
        ],
    },
    "governed": {
        "sources": ["cases/governed/Registry.sol"],
        "function": "Registry.register",
        "description": "register overwrites registry entries for any caller.",
        "expectedPair": ["Admin", "Utilities management"],
        "script": [
            '{"elements": ["onlyGovernor", "governor", "setGovernor"]}',
            '{"role": "Admin", "permission": "Utilities management", "is_new": false}',
            q3(REGISTER_BAD),
            q3(REGISTER_BAD),
            q3(REGISTER_BAD),
        ],
    },
}

BENCH3 = ["gymvault", "feemanager", "pausable"]

NOT_VULNERABLE = '{"vulnerable": false, "reason": "%s"}'
VULNERABLE = '{"vulnerable": true, "reason": "%s"}'

# copilot-mode Q0 subset: five true and five false detector reports
Q0_CASES: dict[str, dict] = {
    "tp-gymvault": {"case": "gymvault", "label": "TP", "expected": "Vulnerable",
                    "answer": VULNERABLE % "Any caller can credit deposits to an arbitrary address."},
    "tp-executor": {"case": "executor", "label": "TP", "expected": "Vulnerable",
                    "answer": "Yes. Anyone can make the contract perform arbitrary calls."},
    "tp-wallet": {"case": "wallet", "label": "TP", "expected": "Vulnerable",
                  "answer": VULNERABLE % "The wallet can be re-initialized by anyone."},
    "tp-rewardtoken": {"case": "rewardtoken", "label": "TP", "expected": "Vulnerable",
                       "answer": "vulnerable: true\nreason: mint is unrestricted"},
    "tp-pausable": {"case": "pausable", "label": "TP", "expected": "Vulnerable",
                    "answer": VULNERABLE % "Anyone can pause the market."},
    "fp-deposit": {"sources": ["cases/gymvault/GymVault.sol"], "function": "GymVault.deposit", "label": "FP",
                   "expected": "NotVulnerable", "answer": NOT_VULNERABLE % "Users deposit for themselves; this is intended."},
    "fp-setbank": {"sources": ["cases/gymvault/GymVault.sol"], "function": "GymVault.setBank", "label": "FP",
                   "expected": "NotVulnerable", "answer": NOT_VULNERABLE % "Already restricted by onlyOwner."},
    "fp-transfer": {"sources": ["cases/rewardtoken/RewardToken.sol"], "function": "RewardToken.transfer", "label": "FP",
                    "expected": "NotVulnerable", "answer": NOT_VULNERABLE % "Transfers only move the caller's own balance."},
    "fp-placeorder": {"sources": ["cases/pausable/Market.sol"], "function": "Market.placeOrder", "label": "FP",
                      "expected": "NotVulnerable", "answer": "No, placing orders is a public feature."},
    # a false report the model wrongly confirms: false positives may slip through, true ones may not
    "fp-fund": {"sources": ["cases/treasury/Treasury.sol"], "function": "Treasury.fund", "label": "FP",
                "expected": "Vulnerable", "answer": VULNERABLE % "Anyone can change the reserves."},
}


def record(case_id: str, sources, function, description, mode, script, confirm=None) -> tuple:
    units = load_units(sources, HERE)
    case = RepairCase(units, function, description, mode, case_id)
    inputs = {"sources": list(sources), "function": function, "description": description, "mode": mode, "sourceRoot": ".."}
    transcript = Transcript(case_id, "mock", inputs)
    provider = ScriptedProvider(script)
    report = run_case(case, provider, store=TaxonomyStore(Taxonomy.shipped()), confirm=confirm, transcript=transcript)
    leftover = len(script) - len(provider.requests)
    if leftover:
        raise SystemExit(f"{case_id}: {leftover} scripted answers were not consumed")
    transcript.save(TRANSCRIPTS / f"{case_id}.jsonl")
    return report, transcript


def main() -> int:
    summary = {}
    for cid, c in CASES.items():
        report, _ = record(cid, c["sources"], c["function"], c["description"], CONFIRMED_INPUT, c["script"])
        if report.patch is not None:
            atomic_write(GOLDENS / f"{cid}.diff", report.patch.unified_diff)
        summary[cid] = {"outcome": report.outcome, "pair": report.pair_used, "error": report.error}
        print(f"{cid:12s} {report.outcome:18s} {report.pair_used} {report.error or ''}")

    def manifest(ids):
        out = []
        for cid in ids:
            c = CASES[cid]
            entry = {
                "id": cid, "sources": c["sources"], "function": c["function"], "description": c["description"],
                "transcript": f"transcripts/{cid}.jsonl", "expectedPair": c["expectedPair"],
            }
            if (GOLDENS / f"{cid}.diff").exists():
                entry["goldenDiff"] = f"goldens/{cid}.diff"
            out.append(entry)
        return {"cases": out}

    atomic_write(HERE / "bench10.json", json.dumps(manifest(list(CASES)), indent=2) + "\n")
    atomic_write(HERE / "bench3.json", json.dumps(manifest(BENCH3), indent=2) + "\n")

    expectations = {}
    for qid, q in Q0_CASES.items():
        base = CASES.get(q.get("case", ""), {})
        sources = q.get("sources") or base["sources"]
        function = q.get("function") or base["function"]
        description = f"Detector report: {function} may lack an access-control check."
        # the operator declines after reading the verdict, so only Q0 is recorded
        report, _ = record(f"q0-{qid}", sources, function, description, COPILOT, [q["answer"]], confirm=lambda v: False)
        expectations[qid] = {"label": q["label"], "expected": q["expected"], "transcript": f"transcripts/q0-{qid}.jsonl"}
        if report.q0_verdict != q["expected"]:
            raise SystemExit(f"{qid}: got {report.q0_verdict}, expected {q['expected']}")
    atomic_write(HERE / "q0_expectations.json", json.dumps(expectations, indent=2, sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())

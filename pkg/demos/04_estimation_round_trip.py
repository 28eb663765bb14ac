"""
From administrative logs to model inputs
========================================

Writes synthetic versions of the three data sources the model is fitted
from (a reference-hospital ED log, a transfer-request log, annual
facility volumes), estimates the parameters back, and checks them
against the values that generated the logs.
"""

# %%
import tempfile
import warnings
from pathlib import Path

import numpy as np

from psychsim import estimators as est
from psychsim.fixture import load_fixture, write_synthetic_logs

cfg = load_fixture()
workdir = Path(tempfile.mkdtemp())
truth = write_synthetic_logs(cfg, workdir)
print("logs in", workdir)

# %%
# Read the three sources.
hccis = est.read_hccis(workdir / "hccis.csv")
ref_id = cfg.reference_facility.facility_id
n_ref = hccis.ed_registrations()[ref_id] / est.DAYS_PER_YEAR
ref_log = est.read_ref_ed_log(workdir / "ref_ed_log.csv", n_ref)
transfers = est.read_transfer_log(workdir / "transfer_log.csv")

# %%
# Day-of-week shares at the reference ED, then per-facility arrival
# rates scaled by each ED's registration volume.
props = est.estimate_ed_proportions(ref_log)
print("share of ED visits needing a bed:", {d: round(v, 4) for d, v in props.items()})
rates = est.estimate_ed_rates(props, hccis)
errs = [abs(rates[(f.facility_id, d)] - r) / r for f in cfg.facilities if f.ed
        for d, r in f.ed.daily_rates.items() if r > 0]
print(f"ED rates: median relative error {np.median(errs):.3f}")

# %%
# Review time and acceptance come from the transfer log; length of stay
# from patient days over admissions.
with warnings.catch_warnings():
    warnings.simplefilter("ignore", est.NoContacts)
    review = est.estimate_review_times(transfers)
    accept = est.estimate_accept_prob(transfers)
los = est.estimate_mean_los(hccis)
for name, got, want in (("review hours", review, truth["review"]), ("acceptance", accept, truth["accept"]),
                        ("mean LoS hours", los, truth["mean_los"])):
    rel = [abs(got[k] - v) / v for k, v in want.items() if v > 0]
    print(f"{name:<15} max relative error {max(rel):.3f} over {len(rel)} entries")

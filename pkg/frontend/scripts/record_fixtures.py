"""Record HTTP fixtures from the fdaw server for the explorer tests.

Builds the standard simulated fits, spins up the API in-process, and dumps
selected endpoint payloads verbatim. Run from the repository root:

    python3 frontend/scripts/record_fixtures.py
"""

import json
from pathlib import Path

from fastapi.testclient import TestClient

from fdaw.fosr import FosrOptions, fit_fosr
from fdaw.fpca import FpcaOptions, fit_fpca
from fdaw.mfpca import MfpcaOptions, fit_mfpca
from fdaw.server import ModelRegistry, create_app
from fdaw.simulate import SimConfig, simulate
from fdaw.tvfpca import TvFpcaOptions, fit_tvfpca

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def build_registry() -> ModelRegistry:
    registry = ModelRegistry()
    ds, _ = simulate("fpca", SimConfig(n_subjects=40, n_points=30,
                                       eigenvalues=(4.0, 1.0), noise_sd=0.5), seed=11)
    registry.add("fpca-demo", fit_fpca(ds, FpcaOptions(pve=0.95)))
    dsm, _ = simulate("mfpca", SimConfig(n_subjects=20, n_points=24, n_visits=3,
                                         eigenvalues=(2.0,), level2_eigenvalues=(1.0,),
                                         noise_sd=0.3), seed=5)
    registry.add("mfpca-demo", fit_mfpca(dsm, MfpcaOptions()))
    dst, _ = simulate("tvfpca", SimConfig(n_subjects=15, n_points=20, noise_sd=0.1,
                                          visits_min=3, visits_max=5,
                                          dyn_intercept_vars=(1.0,), dyn_slope_vars=(0.5,)),
                      seed=21)
    registry.add("tvfpca-demo", fit_tvfpca(dst, TvFpcaOptions(method="lme")))
    dsf, _ = simulate("fosr", SimConfig(n_subjects=40, n_points=24,
                                        eigenvalues=(1.0, 0.25), noise_sd=0.3), seed=3)
    registry.add("fosr-demo", fit_fosr(dsf, ["x"], FosrOptions()))
    return registry


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    client = TestClient(create_app(build_registry()))

    def record(name: str, path: str, method: str = "GET", body=None):
        if method == "GET":
            response = client.get(path)
        else:
            response = client.post(path, json=body)
        response.raise_for_status()
        (OUT / f"{name}.json").write_text(response.text, encoding="utf-8")
        return response.json()

    record("models", "/api/models")
    summary = record("fpca_summary", "/api/model/fpca-demo/summary")
    record("fpca_scores", "/api/model/fpca-demo/scores?kx=1&ky=2")
    subject = summary["subjects"][2]
    fitted = record("fpca_subject_fitted", f"/api/model/fpca-demo/subject/{subject}/fitted")

    # lincom at the same subject's scores: must reproduce the fitted curve
    scores_k = record("fpca_scores_k1", "/api/model/fpca-demo/scores?kx=1&ky=1")
    n_comp = summary["n_components"]
    row = 2
    subject_scores = []
    for k in range(1, n_comp + 1):
        payload = client.get(f"/api/model/fpca-demo/scores?kx={k}&ky={k}").json()
        subject_scores.append(payload["points"][row]["x"])
    assert payload["points"][row]["subject"] == subject
    lincom = record("fpca_lincom_at_subject", "/api/model/fpca-demo/lincom",
                    method="POST", body={"scores": subject_scores})
    (OUT / "fpca_lincom_meta.json").write_text(
        json.dumps({"subject": subject, "row": row, "scores": subject_scores}),
        encoding="utf-8",
    )

    record("mfpca_summary", "/api/model/mfpca-demo/summary")
    record("mfpca_scores_l1", "/api/model/mfpca-demo/scores?kx=1&ky=1&level=1")
    record("tvfpca_summary", "/api/model/tvfpca-demo/summary")
    tv_summary = client.get("/api/model/tvfpca-demo/summary").json()
    record("tvfpca_trajectory",
           f"/api/model/tvfpca-demo/trajectory/{tv_summary['subjects'][0]}?nT=21")
    record("fosr_summary", "/api/model/fosr-demo/summary")
    record("fosr_residuals", "/api/model/fosr-demo/residuals?order=depth")
    print(f"fixtures written to {OUT}")


if __name__ == "__main__":
    main()

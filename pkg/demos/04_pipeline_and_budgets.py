"""The full pipeline plus closed-form token and MAC accounting.

Runs the default dual-branch configuration (16 frames, K=8, reducing
projectors: 2304 + 392 = 2696 visual tokens), then sweeps the ablation
grid of branch modes, projector kinds, and selection on/off.
"""

from framescope import (
    count_macs,
    default_config,
    mac_report,
    make_config,
    run_pipeline,
    stage_plan,
    token_budget,
)

cfg = default_config()
result = run_pipeline(cfg)
print("default configuration (16 frames, K=8, dual, reducing projector)")
print("  key-frames:", result.keyframes.indices)
print("  budget    :", result.budget.to_dict())
print("  tokens    :", result.tokens.tokens.shape)
print("  digest    :", result.digest)
print("  stage ms  :", {k: round(v, 1) for k, v in result.durations_ms.items()})

# Ablation grid: token budget and analytic multiply counts per setup.
print("\nablation grid:")
header = f"{'branch':<11} {'projector':<9} {'selection':<16} {'img tok':>8} {'vid tok':>8} {'total':>6} {'GMACs':>8}"
print(" ", header)
for branch in ("dual", "image_only", "video_only"):
    for kind in ("et_proj", "mlp_proj"):
        for selection in ("attention_based", "none"):
            c = make_config(branch_mode=branch, projector_kind=kind, frame_selection=selection)
            b = token_budget(c)
            m = mac_report(c)
            print(
                f"  {branch:<11} {kind:<9} {selection:<16} "
                f"{b.image_tokens:>8} {b.video_tokens:>8} {b.total:>6} {m.total / 1e9:>8.2f}"
            )

# The analytic counts equal an instrumented multiply counter, exactly.
small = make_config(
    frames=4, image_grid=(4, 4), image_depth=8, image_grid_out=(3, 3),
    video_grid=(4, 4), video_depth=6, video_grid_out=(2, 2), embed_width=5,
)
with count_macs() as counter:
    run_pipeline(small)
print("\ninstrumented multiplies:", counter.total, "| analytic:", mac_report(small).total)

# Selection at K = T/2 halves the video-branch cost exactly.
half = mac_report(make_config())
full = mac_report(make_config(frame_selection="none"))
print("video-projection multiplies, selection on/off:",
      f"{half.video_projection:,} / {full.video_projection:,}")

# Training-stage trainability masks.
print("\ntraining stages:")
for stage in (1, 2, 3):
    plan = stage_plan(stage)
    print(f"  stage {stage}: trainable={sorted(plan.trainable)} frozen={sorted(plan.frozen)}")

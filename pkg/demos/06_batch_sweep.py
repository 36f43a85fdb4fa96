# A scaled-down batch-size sweep: ratio to the relaxation value and wall time
# per trial for each batch size, written as plot-ready CSV.
from qnes.bench import ExperimentConfig, InstanceSpec, NesSpec, SamplerSpec, loglog_r2, sweep_batch_size

base = ExperimentConfig(
    instance=InstanceSpec(n=20, density=0.5, seed=1),
    nes=NesSpec(sampler=SamplerSpec(batch_size=256), iterations=30),
    trials=3,
)
sweep = sweep_batch_size(base, [128, 256, 512], [1.0])
print(sweep.to_csv())

rows = sweep.rows()
print("log-log R^2 of time vs batch: %.3f" % loglog_r2([r["batch_size"] for r in rows], [r["mean_wall_time_s"] for r in rows]))

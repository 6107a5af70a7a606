"""
seisdiff Workflow Modules

Each module runs one disk-backed workflow behind a CLI subcommand:
- synth: dataset generation
- train: model training and resume
- infer: conditional sampling with snapshot grids
- baseline: FX-Decon outputs
- evaluate: SSIM/SNR reports
- diff: scaled difference images

Access modules through a Workbench instance (e.g., workbench.synth, workbench.trainer)
rather than importing module classes directly.
"""

__all__: list[str] = []

"""sonosim: virtual-sonography imitation-learning workbench.

Analytic abdominal phantom, virtual ultrasound renderer with domain
randomization, a kinematic 6-DoF cable-robot model, a scripted expert,
and a keyframe-fusion diffusion policy with its training and evaluation
harness.
"""

__version__ = "0.1.0"

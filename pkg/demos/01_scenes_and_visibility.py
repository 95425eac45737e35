"""Scenes, proxies, and line-of-sight queries.

Generates the three synthetic scenes, degrades one into a coarse proxy the
way a first reconstruction pass would, and pokes at the occlusion oracle.
Run from the repository root:  python3 demos/01_scenes_and_visibility.py
"""

import numpy as np

from viewplan import QualityParams, SceneSpec, degrade_proxy, generate_scene, preprocess_mesh

params = QualityParams()

for kind in ("flat", "boxfield", "canyon"):
    scene = generate_scene(SceneSpec(kind, extent=16.0, obstacles=3, seed=7))
    lo, hi = scene.bounds()
    print(f"{kind:9s} {scene.num_faces:5d} faces, {scene.total_area():7.1f} m^2, "
          f"height {hi[2]:.1f} m")

scene = generate_scene(SceneSpec("boxfield", extent=16.0, obstacles=3, seed=7))
scene = preprocess_mesh(scene, params)  # split faces larger than the view footprint
print(f"\nafter footprint subdivision: {scene.num_faces} faces")

proxy = degrade_proxy(scene, decimation_ratio=0.4, noise_sigma=0.1, seed=7)
print(f"coarse proxy: {proxy.num_faces} faces "
      f"({proxy.num_faces / scene.num_faces:.0%} of the input)")

# line-of-sight: straight above a ground face vs. through a box
ground = int(np.argmin(scene.centroids[:, 2] + np.abs(scene.normals[:, 2] - 1.0)))
c = scene.centroids[ground]
print(f"\nface at {np.round(c, 1)}:")
print("  clear from 5 m above:", not scene.occluded(c + [0, 0, 5.0], c))

# find a wall face and look at it through its own box
wall = int(np.argmax(np.abs(scene.normals[:, 2]) < 1e-9))
cw = scene.centroids[wall]
behind = cw - 5.0 * scene.normals[wall]  # 5 m behind the wall
print("  wall seen from behind its box:", not scene.occluded(behind, cw))
print("  wall seen from in front:      ",
      not scene.occluded(cw + 5.0 * scene.normals[wall], cw))

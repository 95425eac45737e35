"""The full multi-visit loop on a canyon scene.

Visit 1 is the serpentine explore pass (it only yields the noisy proxy);
visit 2 plans viewing rectangles over the whole proxy; later visits re-plan
only over the faces still failing, and the proxy regains true geometry where
coverage succeeded.
"""

from viewplan import QualityParams, SceneSpec, generate_scene, run_pipeline
from viewplan.planner import identify_low_quality

params = QualityParams()
scene = generate_scene(SceneSpec("canyon", extent=14.0, seed=2))
states = run_pipeline(scene, params, max_visits=4, seed=2)

print("visit  +views  planned  covered  low-quality  tour length")
for st in states:
    low = len(identify_low_quality(st.report))
    print(f"{st.visit:4d} {st.views_added:7d} {st.planned_views:8d} "
          f"{st.pass_fraction:8.3f} {low:12d} {st.trajectory.length:10.1f} m"
          + ("   (budget exhausted)" if st.budget_exhausted else ""))

final = states[-1].report
print("\nfinal status totals:", final.summary()["status_totals"])
print("views within budget:", states[-1].planned_views, "<=", params.budget)

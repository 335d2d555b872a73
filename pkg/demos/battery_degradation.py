"""Show how the discharge pattern changes the degradation estimate.

Both traces drain 200 J over 100 s. The burst empties the battery early
and then idles, so it sits at a lower and flatter state of charge. The
estimate weighs the average and the spread of the charge level as well as
the cycle count.

    python3 demos/battery_degradation.py
"""
from mecoffload import battery
from mecoffload.core import BatteryParams

params = BatteryParams()
steady = battery.PowerTrace(b0=1000.0, b_max=1000.0, segments=[(2.0, 100.0)])
burst = battery.PowerTrace(b0=1000.0, b_max=1000.0, segments=[(20.0, 10.0), (0.0, 90.0)])

for name, trace in (("steady", steady), ("burst", burst)):
    r = battery.evaluate(trace, params)
    print(f"{name:>6}: SoC avg {r.soc_avg:.4f}  SoC dev {r.soc_dev:.4f}  "
          f"cycles {r.n_cyc:.4f}  degradation {r.bd:.3e}")

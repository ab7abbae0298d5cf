"""Exponential ratio decay: when does the sum loss stop compared with the product loss?"""
from hmgan.stopping import DecayConfig, check_proposition, loss_curves, simulate, stop_times

cfg = DecayConfig((1.0, 1.0), 0.25)
print("l_h, l_d at t = ln 2:", loss_curves(cfg, 0.6931471805599453))
print("t_h, t_d:", stop_times(cfg))

# one layer decays 100 times faster than the other two
rep = check_proposition((100.0, 1.0, 1.0))
print(f"t_bar={rep.t_bar:.4f} H={rep.threshold:.6f} l_d(t_bar)={rep.l_d_bar:.2e} "
      f"l_h(t_bar)={rep.l_h_bar:.6f} t_h={rep.t_h:.4f} t_d={rep.t_d:.4f}")

print("no dominant rate:", check_proposition((1.0, 1.0, 1.0)).premise_met)

reports = simulate(1000, seed=0)
print(f"t_h > t_d on {sum(r.holds for r in reports)}/{len(reports)} random configs")

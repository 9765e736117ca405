"""Price a put written by a counterparty that may default.

Three prices at the default spot: the complete-market price (as if both
assets were traded), the indifference price with an index hedge, and the
price without any hedge (index ignored).  Then the same along the
counterparty's asset value.

    python demos/vulnerable_put.py
"""

from indiffprice.analytic import complete_market_price, no_hedge_price
from indiffprice.market import derive, default_params
from indiffprice.payoff import VulnerablePayoffParams, vulnerable_put
from indiffprice.splitting import SplitSettings, prepare_payoff, solve

params = default_params()
d = derive(params)
g = vulnerable_put(VulnerablePayoffParams(K=150.0, L=1000.0, alpha=0.05))
g_eps = prepare_payoff(g, 0.01)  # jump at s2 = L smoothed over +-1%

print(f"index share of variance kappa_bar = {d.kappa_bar_P:.3f}")
print(f"asset/index correlations {d.rho_index.round(3)}, asset/asset {d.rho_assets[0, 1]:.3f}\n")

print(f"{'s2':>6} {'complete':>9} {'hedged':>8} {'no hedge':>9} {'hedge':>7}")
for s2 in (100.0, 500.0, 1000.0, 1400.0):
    spot = (50.0, s2)
    r = solve(g, params, SplitSettings(N=11), spot=spot)
    print(f"{s2:6.0f} {complete_market_price(g_eps, params, spot):9.4f} {r.price_at_spot:8.4f} "
          f"{no_hedge_price(g_eps, params, spot):9.4f} {r.hedge_at_spot:7.3f}")

# Partial hedging with the index recovers part of the gap between the
# no-hedge and complete-market prices; default risk pulls every price down
# as the writer's assets approach and fall below L.

"""The report formulas applied to published fleet-wide totals.

Means are exact fractions, rounded half-even only for display.
"""

from fractions import Fraction

from xbeth.datasets import fmt_decimal
from xbeth.stats import stats_throughput

blocks, transactions = 8_100_000, 491_562_222
mean_tx = Fraction(transactions, blocks)
print("transactions per block:", fmt_decimal(mean_tx), f"(exact {float(mean_tx):.6f}, published 60.68)")

tps = stats_throughput({"mean_tx_per_block": Fraction("60.68"), "mean_block_time": Fraction("15.33")})
print("transactions per second:", fmt_decimal(tps), "(published: about 4)")

# a value that sits exactly on a rounding boundary goes to the even neighbour
print(fmt_decimal(Fraction(1, 8)), fmt_decimal(Fraction(3, 8)))

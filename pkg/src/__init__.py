# Donation Reporting Protocol - ledger, decision engine, coverage harness

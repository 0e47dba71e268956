"""Monte Carlo campaigns, single-frame forensics and pinned stress fixtures."""

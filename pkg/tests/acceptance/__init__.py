# Acceptance checks for branch-bayes.

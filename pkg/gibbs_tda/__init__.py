# Gibbs replication of persistence diagrams

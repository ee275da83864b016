# Desk-scale acceptance and step-time benchmarks

# Reporting grammar and act-decide transition systems

# Donation reporting decision engine - predicates, classification, amendments

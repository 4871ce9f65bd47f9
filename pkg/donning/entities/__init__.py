# Value objects shared across services

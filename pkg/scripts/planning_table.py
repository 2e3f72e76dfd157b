"""Sample-size planning table for the reference graph sizes."""
from afc.bounds import format_table, planning_table

if __name__ == "__main__":
    print(format_table(planning_table([0.05, 0.1, 0.2], [0.05, 0.01], [9, 77, 100], [0.05, 0.15])))

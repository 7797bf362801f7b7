import os

db_password = "hunter2"


def run(cmd):
    return os.system(cmd)


def calc(expr):
    return eval(expr)

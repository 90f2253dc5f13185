package demo;

import org.springframework.web.bind.annotation.*;

@RestController
@RequestMapping("/orders")
public class OrderController {
    @GetMapping("/{id}")
    public Order get(@PathVariable String id) {
        return null;
    }

    @PostMapping(value = "/")
    public Order create(@RequestBody Order order) {
        return order;
    }
}
